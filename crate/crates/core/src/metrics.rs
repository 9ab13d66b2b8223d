//! Navigation metrics, seed derivation and CSV persistence.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub success: bool,
    /// Actions the agent took.
    pub agent_steps: u32,
    /// Oracle shortest path from the realized start, in actions.
    pub oracle_steps: u32,
}

/// Success weighted by (normalized inverse) path length, with path length
/// counted in actions so that turning in place is not free.
///
/// Episodes that start inside the goal (`oracle_steps == 0`) carry no
/// information and are skipped.
pub fn spl(outcomes: &[EpisodeOutcome]) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for o in outcomes.iter().filter(|o| o.oracle_steps > 0) {
        n += 1;
        if o.success {
            let l = o.oracle_steps as f64;
            sum += l / (o.agent_steps as f64).max(l);
        }
    }
    if n == 0 {
        return Err(Error::UndefinedMetric("SPL of an empty episode set"));
    }
    Ok(sum / n as f64)
}

pub fn success_rate(outcomes: &[EpisodeOutcome]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::UndefinedMetric("success rate of an empty episode set"));
    }
    Ok(outcomes.iter().filter(|o| o.success).count() as f64 / outcomes.len() as f64)
}

pub fn mean_return(returns: &[f64]) -> Result<f64> {
    if returns.is_empty() {
        return Err(Error::UndefinedMetric("mean return of no episodes"));
    }
    Ok(returns.iter().sum::<f64>() / returns.len() as f64)
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Child seed for a named random stream: the first eight bytes
/// (little-endian) of `SHA-256(master_le_bytes || label)`.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

fn csv_writer<W: std::io::Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv_writer(std::fs::File::create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn parse_csv<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ep(success: bool, p: u32, l: u32) -> EpisodeOutcome {
        EpisodeOutcome { success, agent_steps: p, oracle_steps: l }
    }

    #[test]
    fn spl_hand_cases() {
        assert_eq!(spl(&[ep(true, 17, 17)]).unwrap(), 1.0);
        assert_eq!(spl(&[ep(false, 120, 17)]).unwrap(), 0.0);
        assert_eq!(spl(&[ep(true, 20, 10), ep(false, 5, 10)]).unwrap(), 0.25);
        // shorter than oracle (snapping slack) caps at 1
        assert_eq!(spl(&[ep(true, 16, 17)]).unwrap(), 1.0);
        assert!(matches!(spl(&[]), Err(Error::UndefinedMetric(_))));
        assert!(spl(&[ep(true, 3, 0)]).is_err());
        assert_eq!(spl(&[ep(true, 3, 0), ep(true, 10, 10)]).unwrap(), 1.0);
    }

    #[test]
    fn success_rate_cases() {
        assert_eq!(success_rate(&[ep(true, 1, 1), ep(true, 5, 2)]).unwrap(), 1.0);
        assert_eq!(success_rate(&[ep(false, 1, 1)]).unwrap(), 0.0);
        assert!(success_rate(&[]).is_err());
        assert!(mean_return(&[]).is_err());
        assert_eq!(mean_return(&[1.0, -3.0]).unwrap(), -1.0);
    }

    #[test]
    fn derive_seed_golden() {
        assert_eq!(derive_seed(7, "env"), derive_seed(7, "env"));
        assert_ne!(derive_seed(7, "env"), derive_seed(7, "policy"));
        assert_ne!(derive_seed(7, "env"), derive_seed(8, "env"));
        // pinned: any change here breaks every recorded run
        assert_eq!(derive_seed(0, ""), 0x7a0b_81a1_f570_55af);
        assert_eq!(derive_seed(42, "hf"), 0xa9e9_a9d3_375c_3251);
        assert_eq!(derive_seed(7, "env"), 0xa4aa_dd9a_a7de_df3c);
    }

    #[test]
    fn mean_std_population() {
        assert_eq!(mean_std(&[0.3]), Some((0.3, 0.0)));
        let (m, s) = mean_std(&[1.0, 3.0]).unwrap();
        assert_eq!((m, s), (2.0, 1.0));
        assert_eq!(mean_std(&[]), None);
    }

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Row {
        step: u64,
        value: f64,
        maybe: Option<f64>,
    }

    proptest! {
        #[test]
        fn spl_bounded_by_success_rate_and_permutation_invariant(
            eps in prop::collection::vec((any::<bool>(), 1u32..200, 1u32..60), 1..40),
            rot in 0usize..40,
        ) {
            let outcomes: Vec<_> = eps.iter().map(|&(s, p, l)| ep(s, p, l)).collect();
            let v = spl(&outcomes).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!(v <= success_rate(&outcomes).unwrap() + 1e-12);
            let mut rotated = outcomes.clone();
            let k = rot % rotated.len();
            rotated.rotate_left(k);
            rotated.reverse();
            prop_assert!((spl(&rotated).unwrap() - v).abs() < 1e-12);
            let optimal: Vec<_> = outcomes.iter().map(|o| ep(o.success, o.oracle_steps, o.oracle_steps)).collect();
            prop_assert!((spl(&optimal).unwrap() - success_rate(&optimal).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn csv_round_trip_full_precision(values in prop::collection::vec((any::<u64>(), any::<f64>(), prop::option::of(-1e300f64..1e300)), 1..20)) {
            let rows: Vec<Row> = values
                .iter()
                .filter(|(_, v, _)| v.is_finite())
                .map(|&(step, value, maybe)| Row { step, value, maybe })
                .collect();
            prop_assume!(!rows.is_empty());
            let text = csv_string(&rows).unwrap();
            prop_assert!(!text.contains('\r'));
            let back: Vec<Row> = parse_csv(&text).unwrap();
            prop_assert_eq!(back.len(), rows.len());
            for (a, b) in rows.iter().zip(&back) {
                prop_assert_eq!(a.step, b.step);
                prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
                prop_assert_eq!(a.maybe.map(f64::to_bits), b.maybe.map(f64::to_bits));
            }
        }
    }
}
