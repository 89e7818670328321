//! Datasets shipped with the crate.

use crate::series::Series;

const SAT_CSV: &str = include_str!("../../../data/sat_critical_reading_2000_2015.csv");

/// Mean SAT Critical Reading scores, total group, 2000–2015, labelled by year.
pub fn sat_critical_reading() -> Series {
    let mut labels = Vec::new();
    let mut y = Vec::new();
    for line in SAT_CSV.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let (label, value) = line.split_once(',').expect("bundled csv has two columns");
        labels.push(label.trim().to_string());
        y.push(value.trim().parse().expect("bundled csv is numeric"));
    }
    Series::new(y).with_labels(labels)
}
