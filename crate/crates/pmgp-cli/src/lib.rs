//! Benchmark harness for the streaming GP forecasting engine: CSV
//! ingestion, one-step-ahead runs of the GP model against online AR
//! baselines, and machine-readable reports.

pub mod ingest;
pub mod report;
pub mod runner;

use pmgp::Error;

/// Process exit code for an error: 3 for numerical failures, 2 for
/// everything else (input, parse, ordering, dimension, domain).
pub fn exit_code_for(err: &Error) -> u8 {
    if err.is_numerical() {
        3
    } else {
        2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_split_numerical_from_input() {
        assert_eq!(exit_code_for(&Error::Conditioning("x".into())), 3);
        assert_eq!(exit_code_for(&Error::Input("x".into())), 2);
        assert_eq!(exit_code_for(&Error::Parse("x".into())), 2);
        assert_eq!(exit_code_for(&Error::Ordering("x".into())), 2);
        assert_eq!(exit_code_for(&Error::DegenerateSeries("x".into())), 2);
    }
}
