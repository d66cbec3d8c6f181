//! Aligned ASCII tables for terminal output.

use comfy_table::presets::ASCII_FULL_CONDENSED;
use comfy_table::{CellAlignment, Table};
use glf_core::classify::{AuResult, ExpressionResult, MethodComparison, SweepTable};

fn table(header: Vec<String>) -> Table {
    let mut t = Table::new();
    t.load_style(ASCII_FULL_CONDENSED).set_header(header);
    t
}

fn right_align(t: &mut Table, from: usize) {
    let n = t.column_count();
    for i in from..n {
        if let Some(c) = t.column_mut(i) {
            c.set_cell_alignment(CellAlignment::Right);
        }
    }
}

pub fn key_values(rows: &[(&str, String)]) -> String {
    let mut t = table(vec!["item".into(), "value".into()]);
    for (k, v) in rows {
        t.add_row(vec![k.to_string(), v.clone()]);
    }
    t.to_string()
}

pub fn folds(r: &ExpressionResult) -> String {
    let mut t = table(vec!["fold".into(), "test scans".into(), "accuracy %".into()]);
    for (i, (acc, n)) in r.fold_accuracies.iter().zip(&r.fold_sizes).enumerate() {
        t.add_row(vec![i.to_string(), n.to_string(), format!("{acc:.2}")]);
    }
    t.add_row(vec![
        "mean".into(),
        r.fold_sizes.iter().sum::<usize>().to_string(),
        format!("{:.2} +- {:.2}", r.mean_accuracy, r.std_accuracy),
    ]);
    right_align(&mut t, 1);
    t.to_string()
}

/// Rows are the true class, columns the prediction, entries row percentages.
pub fn confusion(r: &ExpressionResult) -> String {
    let c = &r.confusion;
    let mut header = vec!["true \\ predicted".to_string()];
    header.extend(c.classes.iter().cloned());
    let mut t = table(header);
    for (name, row) in c.classes.iter().zip(&c.percentages) {
        let mut cells = vec![name.clone()];
        cells.extend(row.iter().map(|v| format!("{v:.2}")));
        t.add_row(cells);
    }
    right_align(&mut t, 1);
    t.to_string()
}

pub fn aus(r: &AuResult) -> String {
    let mut t = table(
        ["AU", "positives", "precision", "recall", "F1", "skipped folds"]
            .map(String::from)
            .to_vec(),
    );
    for s in &r.scores {
        t.add_row(vec![
            s.au.to_string(),
            s.positives.to_string(),
            format!("{:.3}", s.precision),
            format!("{:.3}", s.recall),
            format!("{:.3}", s.f1),
            s.skipped_folds.len().to_string(),
        ]);
    }
    right_align(&mut t, 0);
    format!("{t}\nweighted F1: {:.3}", r.weighted_f1)
}

pub fn sweep(r: &SweepTable) -> String {
    let mut header = vec![String::new()];
    header.extend(r.columns().iter().map(|k| format!("k={k}")));
    let mut t = table(header);
    let mut mean = vec!["accuracy %".to_string()];
    mean.extend(r.rows.iter().map(|row| format!("{:.2}", row.mean_accuracy)));
    let mut std = vec!["std".to_string()];
    std.extend(r.rows.iter().map(|row| format!("{:.2}", row.std_accuracy)));
    t.add_row(mean);
    t.add_row(std);
    right_align(&mut t, 1);
    t.to_string()
}

pub fn comparison(c: &MethodComparison) -> String {
    let mut t = table(vec![
        "fold".into(),
        format!("{} - {} (points)", c.first, c.second),
    ]);
    for (i, d) in c.differences.iter().enumerate() {
        t.add_row(vec![i.to_string(), format!("{d:+.2}")]);
    }
    t.add_row(vec!["mean".into(), format!("{:+.2}", c.mean_difference)]);
    right_align(&mut t, 1);
    format!(
        "{t}\n{}: {:.2}%  {}: {:.2}%  {} >= {}: {}",
        c.first, c.first_mean, c.second, c.second_mean, c.first, c.second, c.first_not_worse
    )
}
