//! Texts bundled for offline runs and tests.

/// Ten descriptions in the attribute grammar, one per line.
pub const ATTRIBUTE_TEXTS: &str = include_str!("../corpus/attribute_texts.txt");
/// A crash-report narrative and a model answer for it in the canonical format.
pub const CRASH_REPORT: &str = include_str!("../corpus/crash_report.txt");
pub const CRASH_REPORT_ANSWER: &str = include_str!("../corpus/crash_report_answer.txt");

pub fn attribute_texts() -> Vec<&'static str> {
    ATTRIBUTE_TEXTS.lines().map(str::trim).filter(|l| !l.is_empty()).collect()
}
