use std::collections::BTreeMap;
use std::path::Path;

use crate::netmodel::{Network, PerElement};

use super::BenchError;

/// Time-step profiles in kW, keyed by name.
pub type Profiles = BTreeMap<String, Vec<f64>>;

/// One profile from CSV with a header row; the value is the last column
/// (`time,mult` in the 5-minute daily profile files).
pub fn read_profile<R: std::io::Read>(input: R) -> Result<Vec<f64>, BenchError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let last = rec.iter().last().unwrap_or_default();
        out.push(last.parse().map_err(|_| BenchError::Profile(format!("not a number: `{last}`")))?);
    }
    Ok(out)
}

/// Every `*.csv` in `dir`, keyed by file stem.
pub fn read_profiles(dir: &Path) -> Result<Profiles, BenchError> {
    let mut out = Profiles::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            let name = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            out.insert(name, read_profile(std::fs::File::open(&path)?)?);
        }
    }
    Ok(out)
}

/// Set every profiled load to its value at `step`, split evenly over its
/// elements, with reactive power from `power_factor` (lagging). A generator
/// whose id names a profile gets that value as its active and reactive
/// capacity in the same way.
pub fn apply_snapshot(net: &Network, profiles: &Profiles, step: usize, power_factor: f64) -> Result<Network, BenchError> {
    if !(power_factor > 0.0 && power_factor <= 1.0) {
        return Err(BenchError::Profile(format!("power factor {power_factor} outside (0, 1]")));
    }
    let tan = power_factor.acos().tan();
    let value = |name: &str| -> Result<f64, BenchError> {
        let p = profiles.get(name).ok_or_else(|| BenchError::Profile(format!("no profile `{name}`")))?;
        p.get(step).map(|v| v * 1000.0).ok_or_else(|| BenchError::Profile(format!("profile `{name}` has no step {step}")))
    };
    let mut out = net.clone();
    for d in out.loads.values_mut() {
        if let Some(name) = d.profile.clone() {
            let p = value(&name)? / d.n_elements().max(1) as f64;
            d.p_nom = PerElement::Uniform(p);
            d.q_nom = PerElement::Uniform(p * tan);
        }
    }
    for g in out.generators.values_mut() {
        if profiles.contains_key(&g.id) {
            let p = value(&g.id)? / g.n_elements().max(1) as f64;
            g.p_max = PerElement::Uniform(p);
            g.q_max = PerElement::Uniform(p * tan);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn reads_last_column() {
        let p = read_profile("time,mult\n00:00, 0.25\n00:05,1.5\n".as_bytes()).unwrap();
        assert_eq!(p, vec![0.25, 1.5]);
        assert!(matches!(read_profile("t,m\n0,x\n".as_bytes()), Err(BenchError::Profile(_))));
    }

    #[test]
    fn snapshot_sets_load_in_kw() {
        let mut net = fixtures::f1_opf();
        net.loads.get_mut("d1").unwrap().profile = Some("house".into());
        let profiles = Profiles::from([("house".to_string(), vec![0.0, 3.0]), ("dg1".to_string(), vec![0.0, 2.0])]);
        let out = apply_snapshot(&net, &profiles, 1, 1.0).unwrap();
        let d = &out.loads["d1"];
        assert_eq!(d.p_nom, PerElement::Uniform(1000.0));
        assert!(d.q_nom.get(0).abs() < 1e-9);
        assert_eq!(out.generators["dg1"].p_max, PerElement::Uniform(2000.0));
        assert!(apply_snapshot(&net, &profiles, 2, 0.95).is_err());
        assert!(apply_snapshot(&net, &profiles, 1, 0.0).is_err());
    }
}
