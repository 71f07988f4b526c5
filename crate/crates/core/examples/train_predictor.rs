//! Trains the LSTM peak forecaster and compares it with a recent-peak
//! heuristic on traces it has not seen.

use std::time::Instant;

use opd::predictor::{
    evaluate_smape, train_predictor, training_pairs, LoadForecaster, PredictorHyper, RecentPeak,
};
use opd::workload::{generate_trace, smape, Pattern, PatternParams};

fn main() -> opd::Result<()> {
    let params = PatternParams::default();
    let corpus = |first: u64| -> opd::Result<Vec<_>> {
        [Pattern::Fluctuating, Pattern::SteadyLow, Pattern::SteadyHigh, Pattern::Fluctuating]
            .iter()
            .enumerate()
            .map(|(i, p)| generate_trace(*p, 1200, first + i as u64, &params))
            .collect()
    };
    let train = corpus(1)?;
    let test = corpus(50)?;

    let start = Instant::now();
    let (model, report) = train_predictor(&train, &PredictorHyper::default())?;
    println!(
        "trained on {} windows in {:.1?}, final loss {:.5}",
        report.train_samples,
        start.elapsed(),
        report.final_train_loss
    );

    let pairs = training_pairs(&test, 1)?;
    let lstm = evaluate_smape(&model, &pairs)?;
    let baseline = RecentPeak::default();
    let (pred, actual): (Vec<f64>, Vec<f64>) = pairs
        .iter()
        .map(|(h, y)| (baseline.predict_peak(h).unwrap_or(0.0), *y))
        .unzip();
    println!("held-out SMAPE: lstm {lstm:.2}%, recent peak {:.2}%", smape(&pred, &actual)?);

    let t = Instant::now();
    model.predict_peak(&pairs[0].0)?;
    println!("one prediction takes {:.2?}", t.elapsed());
    Ok(())
}
