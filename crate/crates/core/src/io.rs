//! JSON file formats: instances, Γ dumps, and regret reports.
//!
//! Reals are written in scientific notation with 17 significant digits,
//! which round-trips every `f64` exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::{CompactFormatter, Formatter};

use crate::enumerate::{EnumStats, NondominatedEntry, NondominatedSet, PolicyKey};
use crate::error::{Error, Result};
use crate::instance::{GenConfig, RumdpInstance, FORMAT_VERSION};
use crate::mdp::{DeterministicPolicy, Mdp, OccupancyFrequency};
use crate::regret::RegretSolution;
use crate::reward::RewardPolytope;

struct PreciseFormatter;

impl Formatter for PreciseFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        CompactFormatter.write_f32(writer, value)
    }
}

/// Compact JSON with full-precision reals and a trailing newline.
pub fn to_precise_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PreciseFormatter);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::MalformedFile(e.to_string()))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintsFile {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    format_version: u64,
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    alpha: Vec<f64>,
    transitions: Vec<Vec<Vec<f64>>>,
    reward_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    basis: Option<Vec<Vec<Vec<f64>>>>,
    constraints: ConstraintsFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<GenConfig>,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: Option<u64>,
}

fn check_version(text: &str) -> Result<()> {
    // Only trust the probe on well-formed input; the full parse reports the rest.
    if let Ok(VersionProbe {
        format_version: Some(found),
    }) = serde_json::from_str::<VersionProbe>(text)
    {
        if found != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found,
                expected: FORMAT_VERSION,
            });
        }
    }
    Ok(())
}

fn malformed(what: &str, e: serde_json::Error) -> Error {
    Error::MalformedFile(format!("{what}: {e}"))
}

fn check_len(field: &str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::MalformedFile(format!(
            "field `{field}`: expected length {expected}, got {got}"
        )))
    }
}

impl RumdpInstance {
    pub fn to_json(&self) -> Result<String> {
        let n = self.mdp.n_states();
        let m = self.mdp.n_actions();
        let d = self.polytope.dim();
        let transitions = (0..n)
            .map(|s| (0..m).map(|a| self.mdp.transition_row(s, a).to_vec()).collect())
            .collect();
        let basis = (!self.polytope.is_identity_basis()).then(|| {
            (0..n)
                .map(|s| {
                    (0..m)
                        .map(|a| self.polytope.basis_row(self.mdp.pair(s, a)).to_vec())
                        .collect()
                })
                .collect()
        });
        let file = InstanceFile {
            format_version: FORMAT_VERSION,
            n_states: n,
            n_actions: m,
            gamma: self.mdp.gamma(),
            alpha: self.mdp.alpha().to_vec(),
            transitions,
            reward_dim: d,
            basis,
            constraints: ConstraintsFile {
                a: self.polytope.rows().map(<[f64]>::to_vec).collect(),
                b: self.polytope.b().to_vec(),
            },
            meta: self.meta.clone(),
        };
        to_precise_json(&file)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        check_version(text)?;
        let file: InstanceFile = serde_json::from_str(text).map_err(|e| malformed("instance", e))?;
        let (n, m, d) = (file.n_states, file.n_actions, file.reward_dim);
        check_len("alpha", n, file.alpha.len())?;
        check_len("transitions", n, file.transitions.len())?;
        let mut transition = Vec::with_capacity(n * m * n);
        for (s, per_state) in file.transitions.iter().enumerate() {
            check_len(&format!("transitions[{s}]"), m, per_state.len())?;
            for (a, row) in per_state.iter().enumerate() {
                check_len(&format!("transitions[{s}][{a}]"), n, row.len())?;
                transition.extend_from_slice(row);
            }
        }
        let mdp = Mdp::new(n, m, transition, file.alpha, file.gamma)?;

        check_len("constraints.b", file.constraints.a.len(), file.constraints.b.len())?;
        for (i, row) in file.constraints.a.iter().enumerate() {
            check_len(&format!("constraints.a[{i}]"), d, row.len())?;
        }
        let polytope = match file.basis {
            None => {
                if d != n * m {
                    return Err(Error::MalformedFile(format!(
                        "field `basis` omitted, so reward_dim must be {} (got {d})",
                        n * m
                    )));
                }
                RewardPolytope::with_identity_basis(n * m, file.constraints.a, file.constraints.b)?
            }
            Some(basis) => {
                check_len("basis", n, basis.len())?;
                let mut flat = Vec::with_capacity(n * m * d);
                for (s, per_state) in basis.iter().enumerate() {
                    check_len(&format!("basis[{s}]"), m, per_state.len())?;
                    for (a, row) in per_state.iter().enumerate() {
                        check_len(&format!("basis[{s}][{a}]"), d, row.len())?;
                        flat.extend_from_slice(row);
                    }
                }
                RewardPolytope::with_basis(n * m, d, file.constraints.a, file.constraints.b, flat)?
            }
        };
        Ok(RumdpInstance {
            mdp,
            polytope,
            meta: file.meta,
        })
    }
}

pub fn save_instance(instance: &RumdpInstance, path: &Path) -> Result<()> {
    fs::write(path, instance.to_json()?)?;
    Ok(())
}

pub fn load_instance(path: &Path) -> Result<RumdpInstance> {
    RumdpInstance::from_json(&fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpEntry {
    pub key: PolicyKey,
    pub witness_w: Vec<f64>,
    pub occupancy: Vec<f64>,
}

/// Serialized Γ. Timing is deliberately absent so that reruns compare equal
/// byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaDump {
    pub format_version: u64,
    pub method: String,
    pub entries: Vec<DumpEntry>,
    pub stats: EnumStats,
}

impl GammaDump {
    pub fn from_set(set: &NondominatedSet, method: &str) -> Self {
        GammaDump {
            format_version: FORMAT_VERSION,
            method: method.to_string(),
            entries: set
                .entries()
                .iter()
                .map(|e| DumpEntry {
                    key: e.key.clone(),
                    witness_w: e.witness_w.clone(),
                    occupancy: e.occupancy.to_vec(),
                })
                .collect(),
            stats: set.stats,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        to_precise_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        check_version(text)?;
        serde_json::from_str(text).map_err(|e| malformed("nondominated set dump", e))
    }

    /// Rebuilds the set against its instance, checking shapes.
    pub fn into_set(self, mdp: &Mdp, polytope: &RewardPolytope) -> Result<NondominatedSet> {
        let mut set = NondominatedSet::new();
        for (i, e) in self.entries.into_iter().enumerate() {
            check_len(&format!("entries[{i}].key"), mdp.n_states(), e.key.actions().len())?;
            check_len(&format!("entries[{i}].occupancy"), mdp.n_pairs(), e.occupancy.len())?;
            check_len(&format!("entries[{i}].witness_w"), polytope.dim(), e.witness_w.len())?;
            if e.key.actions().iter().any(|&a| a >= mdp.n_actions()) {
                return Err(Error::MalformedFile(format!(
                    "entries[{i}].key: action out of range"
                )));
            }
            set.insert(NondominatedEntry {
                policy: DeterministicPolicy::new(e.key.actions().to_vec()),
                key: e.key,
                occupancy: OccupancyFrequency::new(e.occupancy),
                witness_w: e.witness_w,
            });
        }
        set.stats = self.stats;
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureWeight {
    pub key: PolicyKey,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub method: String,
    pub regret: f64,
    pub mixture: Vec<MixtureWeight>,
    /// L1 gap between the played occupancy and the reported mixture, in
    /// weight space; zero for the one-shot LP.
    pub mixture_residual: f64,
    pub occupancy: Vec<f64>,
    pub iterations: usize,
    pub lp_count: usize,
    pub wall_ms: f64,
}

impl RegretReport {
    pub fn new(solution: &RegretSolution, method: &str) -> Self {
        RegretReport {
            method: method.to_string(),
            regret: solution.regret,
            mixture: solution
                .support
                .iter()
                .map(|(key, weight)| MixtureWeight {
                    key: key.clone(),
                    weight: *weight,
                })
                .collect(),
            mixture_residual: solution.support_residual,
            occupancy: solution.occupancy.clone(),
            iterations: solution.iterations,
            lp_count: solution.lp_count,
            wall_ms: solution.wall_ms,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        to_precise_json(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip_exactly() {
        let values = vec![0.1, -1.0 / 3.0, 1e-300, 5e-324, f64::MAX, 0.0, -0.0, 123456.789];
        let text = to_precise_json(&values).unwrap();
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        for (a, b) in values.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn version_is_checked() {
        let err = RumdpInstance::from_json(r#"{"format_version": 2}"#).unwrap_err();
        assert!(matches!(err, Error::VersionMismatch { found: 2, expected: 1 }));
    }

    #[test]
    fn truncated_is_malformed() {
        let err = RumdpInstance::from_json(r#"{"format_version": 1, "n_states": 2"#).unwrap_err();
        assert!(matches!(err, Error::MalformedFile(_)));
    }
}
