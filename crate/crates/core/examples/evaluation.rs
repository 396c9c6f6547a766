//! AUC, precision/recall/F1 at a threshold, a sweep, and a formatted table.

use retarget::eval::{auc, evaluate, format_table, threshold_sweep};

fn main() -> retarget::Result<()> {
    let scores = [0.9, 0.8, 0.7, 0.6, 0.55, 0.4, 0.3, 0.2, 0.1, 0.05];
    let labels = [true, true, false, true, false, true, false, false, false, false];
    println!("AUC {:.3}", auc(&scores, &labels)?);
    for (t, m) in threshold_sweep(&scores, &labels, &[0.25, 0.5, 0.75]) {
        println!("threshold {t:.2}: precision {:.2} recall {:.2} f1 {:.2}", m.precision, m.recall, m.f1);
    }
    let flipped: Vec<f64> = scores.iter().map(|s| 1.0 - s).collect();
    let table = [evaluate("model", &scores, &labels, 0.5)?, evaluate("inverted", &flipped, &labels, 0.5)?];
    print!("{}", format_table(&table));
    Ok(())
}
