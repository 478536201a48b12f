//! Full-scale acceptance run: every criterion, one pass/fail line each.

use physml_cli::config::Scale;
use physml_cli::reproduce::{reproduce_all, ReproduceOptions, CRITERIA};

#[test]
fn acceptance_criteria() {
    let tmp = tempfile::TempDir::new().unwrap();
    let rows = reproduce_all(&ReproduceOptions::new(0, Scale::Full), tmp.path()).expect("reproduce-all runs");
    assert_eq!(rows.len(), CRITERIA.len());
    for row in &rows {
        println!("{}", row.line());
    }
    let failed: Vec<String> = rows.iter().filter(|r| !r.pass).map(|r| format!("{} {}", r.id, r.name)).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
