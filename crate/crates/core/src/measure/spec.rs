use serde::{Deserialize, Serialize};

use super::{AtomicMeasure, Chirality};
use crate::digest::{canonical_json, combine};
use crate::error::{Error, Result};

/// Declarative description of W or V.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    pub components: Vec<Component>,
    pub chirality: Chirality,
    #[serde(default)]
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Component {
    /// Lebesgue measure on [0,1) scaled to `mass`.
    Uniform {
        #[serde(default = "one")]
        mass: f64,
    },
    /// Piecewise constant density `slopes[i]` on `[breakpoints[i], breakpoints[i+1])`.
    PiecewiseLinear { breakpoints: Vec<f64>, slopes: Vec<f64> },
    /// Explicit `[position, mass]` pairs.
    Atoms { atoms: Vec<[f64; 2]> },
    /// Self-similar measure of the maps `x -> offsets[i] + ratios[i] * x`,
    /// expanded to `depth` levels. Offsets default to equal gaps.
    IfsSelfSimilar {
        ratios: Vec<f64>,
        weights: Vec<f64>,
        depth: u32,
        #[serde(default = "one")]
        mass: f64,
        #[serde(default)]
        offsets: Option<Vec<f64>>,
    },
}

fn one() -> f64 {
    1.0
}

const MAX_IFS_ATOMS: usize = 1 << 22;

impl MeasureSpec {
    pub fn uniform(chirality: Chirality) -> Self {
        Self { components: vec![Component::Uniform { mass: 1.0 }], chirality, label: "uniform".into() }
    }

    pub fn cantor(depth: u32, chirality: Chirality) -> Self {
        Self {
            components: vec![Component::IfsSelfSimilar {
                ratios: vec![1.0 / 3.0, 1.0 / 3.0],
                weights: vec![0.5, 0.5],
                depth,
                mass: 1.0,
                offsets: None,
            }],
            chirality,
            label: format!("cantor-{depth}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::InvalidSpec("no components".into()));
        }
        let mut total = 0.0;
        for c in &self.components {
            total += c.validate()?;
        }
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidSpec(format!("total mass {total} must be finite and positive")));
        }
        Ok(())
    }

    pub fn digest(&self, resolution: usize) -> String {
        let json = canonical_json(self).expect("spec serializes");
        combine(&[&json, &resolution.to_string()])
    }
}

fn positive(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("{what} must be positive and finite, got {x}")))
    }
}

impl Component {
    /// Checks invariants and returns the component's mass.
    fn validate(&self) -> Result<f64> {
        match self {
            Component::Uniform { mass } => {
                positive(*mass, "uniform mass")?;
                Ok(*mass)
            }
            Component::PiecewiseLinear { breakpoints, slopes } => {
                if breakpoints.len() != slopes.len() + 1 || slopes.is_empty() {
                    return Err(Error::InvalidSpec(format!(
                        "{} breakpoints need {} slopes, got {}",
                        breakpoints.len(),
                        breakpoints.len().saturating_sub(1),
                        slopes.len()
                    )));
                }
                if breakpoints[0] < 0.0 || *breakpoints.last().unwrap() > 1.0 {
                    return Err(Error::InvalidSpec("breakpoints must lie in [0,1]".into()));
                }
                if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::InvalidSpec("breakpoints must be strictly increasing".into()));
                }
                let mut mass = 0.0;
                for (i, &s) in slopes.iter().enumerate() {
                    positive(s, "slope")?;
                    mass += s * (breakpoints[i + 1] - breakpoints[i]);
                }
                Ok(mass)
            }
            Component::Atoms { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::InvalidSpec("atoms component is empty".into()));
                }
                let mut mass = 0.0;
                let mut seen: Vec<f64> = Vec::with_capacity(atoms.len());
                for &[p, m] in atoms {
                    if !(0.0..1.0).contains(&p) {
                        return Err(Error::InvalidSpec(format!("atom position {p} outside [0,1)")));
                    }
                    positive(m, "atom mass")?;
                    seen.push(p);
                    mass += m;
                }
                seen.sort_by(f64::total_cmp);
                if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
                    return Err(Error::InvalidSpec(format!("duplicate atom position {}", w[0])));
                }
                Ok(mass)
            }
            Component::IfsSelfSimilar { ratios, weights, depth, mass, offsets } => {
                positive(*mass, "ifs mass")?;
                if ratios.is_empty() || ratios.len() != weights.len() {
                    return Err(Error::InvalidSpec("ifs needs equally many ratios and weights".into()));
                }
                if let Some(r) = ratios.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
                    return Err(Error::InvalidSpec(format!("ifs ratio {r} not in (0,1)")));
                }
                for &w in weights {
                    positive(w, "ifs weight")?;
                }
                let wsum: f64 = weights.iter().sum();
                if (wsum - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidSpec(format!("ifs weights sum to {wsum}, not 1")));
                }
                let count = (ratios.len() as f64).powi(*depth as i32);
                if count > MAX_IFS_ATOMS as f64 {
                    return Err(Error::InvalidSpec(format!("ifs expansion too large ({count} atoms)")));
                }
                let offs = ifs_offsets(ratios, offsets.as_deref())?;
                for (o, r) in offs.iter().zip(ratios) {
                    if *o < 0.0 || o + r > 1.0 + 1e-15 {
                        return Err(Error::InvalidSpec(format!("ifs map [{o}, {}] leaves [0,1]", o + r)));
                    }
                }
                Ok(*mass)
            }
        }
    }

    fn atoms(&self, resolution: usize, out: &mut Vec<(f64, f64)>) {
        match self {
            Component::Uniform { mass } => {
                let n = resolution as f64;
                out.extend((0..resolution).map(|k| ((k as f64 + 0.5) / n, mass / n)));
            }
            Component::PiecewiseLinear { breakpoints, slopes } => {
                // cumulative mass at each breakpoint
                let mut cum = vec![0.0];
                for (i, s) in slopes.iter().enumerate() {
                    let last = *cum.last().unwrap();
                    cum.push(last + s * (breakpoints[i + 1] - breakpoints[i]));
                }
                let total = *cum.last().unwrap();
                let cell = total / resolution as f64;
                let mut seg = 0;
                for k in 0..resolution {
                    let target = (k as f64 + 0.5) * cell;
                    while seg + 1 < slopes.len() && cum[seg + 1] < target {
                        seg += 1;
                    }
                    let x = breakpoints[seg] + (target - cum[seg]) / slopes[seg];
                    out.push((x.min(breakpoints[seg + 1]), cell));
                }
            }
            Component::Atoms { atoms } => out.extend(atoms.iter().map(|&[p, m]| (p, m))),
            Component::IfsSelfSimilar { ratios, weights, depth, mass, offsets } => {
                let offs = ifs_offsets(ratios, offsets.as_deref()).expect("validated");
                let mut cells = vec![(0.0f64, 1.0f64, *mass)];
                for _ in 0..*depth {
                    let mut next = Vec::with_capacity(cells.len() * ratios.len());
                    for &(lo, len, m) in &cells {
                        for i in 0..ratios.len() {
                            next.push((lo + len * offs[i], len * ratios[i], m * weights[i]));
                        }
                    }
                    cells = next;
                }
                out.extend(cells.into_iter().map(|(lo, len, m)| (lo + 0.5 * len, m)));
            }
        }
    }
}

fn ifs_offsets(ratios: &[f64], given: Option<&[f64]>) -> Result<Vec<f64>> {
    if let Some(o) = given {
        if o.len() != ratios.len() {
            return Err(Error::InvalidSpec("ifs offsets length differs from ratios".into()));
        }
        return Ok(o.to_vec());
    }
    let m = ratios.len();
    let used: f64 = ratios.iter().sum();
    if used > 1.0 + 1e-15 {
        return Err(Error::InvalidSpec(format!("ifs ratios sum to {used} > 1; give explicit offsets")));
    }
    let gap = if m > 1 { (1.0 - used) / (m - 1) as f64 } else { 0.0 };
    let mut offs = Vec::with_capacity(m);
    let mut x = 0.0;
    for r in ratios {
        offs.push(x);
        x += r + gap;
    }
    Ok(offs)
}

/// Compile a spec to atoms. `resolution` is the number of equal-mass cells
/// used for each continuous component.
pub fn compile(spec: &MeasureSpec, resolution: usize) -> Result<AtomicMeasure> {
    if resolution == 0 {
        return Err(Error::InvalidArgument("resolution must be at least 1".into()));
    }
    spec.validate()?;
    let mut atoms = Vec::new();
    for c in &spec.components {
        c.atoms(resolution, &mut atoms);
    }
    AtomicMeasure::build(atoms, spec.chirality, resolution, Some(spec.digest(resolution)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_resolution_four() {
        let m = compile(&MeasureSpec::uniform(Chirality::RightContinuous), 4).unwrap();
        assert_eq!(m.positions(), &[0.125, 0.375, 0.625, 0.875]);
        assert!(m.masses().iter().all(|&x| x == 0.25));
    }

    #[test]
    fn explicit_atoms_unchanged() {
        let spec = MeasureSpec {
            components: vec![Component::Atoms { atoms: vec![[0.25, 0.5], [0.75, 0.5]] }],
            chirality: Chirality::LeftContinuous,
            label: String::new(),
        };
        let m = compile(&spec, 17).unwrap();
        assert_eq!(m.positions(), &[0.25, 0.75]);
        assert_eq!(m.masses(), &[0.5, 0.5]);
    }

    #[test]
    fn cantor_depth_three() {
        let m = compile(&MeasureSpec::cantor(3, Chirality::RightContinuous), 1).unwrap();
        // enumerate the words independently: each digit picks the left or right third
        let mut expected = Vec::new();
        for word in 0..8u32 {
            let mut lo = 0.0;
            let mut len = 1.0;
            for level in (0..3).rev() {
                len /= 3.0;
                if word >> level & 1 == 1 {
                    lo += 2.0 * len;
                }
            }
            expected.push(lo + len / 2.0);
        }
        assert_eq!(m.len(), 8);
        for (p, e) in m.positions().iter().zip(&expected) {
            assert!((p - e).abs() < 1e-15, "{p} vs {e}");
        }
        assert!(m.masses().iter().all(|&x| x == 0.125));
    }

    #[test]
    fn piecewise_bins_are_mass_midpoints() {
        let spec = MeasureSpec {
            components: vec![Component::PiecewiseLinear { breakpoints: vec![0.0, 0.5, 1.0], slopes: vec![1.0, 3.0] }],
            chirality: Chirality::RightContinuous,
            label: String::new(),
        };
        let m = compile(&spec, 4).unwrap();
        // total mass 2, cells of 0.5; targets 0.25, 0.75, 1.25, 1.75
        let want = [0.25, 0.5 + 0.25 / 3.0, 0.5 + 0.75 / 3.0, 0.5 + 1.25 / 3.0];
        for (p, w) in m.positions().iter().zip(want) {
            assert!((p - w).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let bad_ratio = MeasureSpec {
            components: vec![Component::IfsSelfSimilar {
                ratios: vec![1.2, 0.3],
                weights: vec![0.5, 0.5],
                depth: 2,
                mass: 1.0,
                offsets: None,
            }],
            chirality: Chirality::RightContinuous,
            label: String::new(),
        };
        assert!(compile(&bad_ratio, 4).is_err());
        let overlapping = MeasureSpec {
            components: vec![Component::PiecewiseLinear { breakpoints: vec![0.0, 0.6, 0.5], slopes: vec![1.0, 1.0] }],
            chirality: Chirality::RightContinuous,
            label: String::new(),
        };
        assert!(compile(&overlapping, 4).is_err());
        let zero = MeasureSpec {
            components: vec![Component::Atoms { atoms: vec![[0.2, 0.0]] }],
            chirality: Chirality::RightContinuous,
            label: String::new(),
        };
        assert!(compile(&zero, 4).is_err());
        let dup = MeasureSpec {
            components: vec![Component::Atoms { atoms: vec![[0.2, 0.5], [0.2, 0.5]] }],
            chirality: Chirality::RightContinuous,
            label: String::new(),
        };
        assert!(compile(&dup, 4).is_err());
    }

    #[test]
    fn json_rejects_unknown_keys() {
        let ok = r#"{"components":[{"kind":"uniform"}],"chirality":"left_continuous"}"#;
        assert!(serde_json::from_str::<MeasureSpec>(ok).is_ok());
        let bad = r#"{"components":[{"kind":"uniform","mas":1.0}],"chirality":"left_continuous"}"#;
        assert!(serde_json::from_str::<MeasureSpec>(bad).is_err());
    }

    #[test]
    fn digest_depends_on_resolution() {
        let s = MeasureSpec::uniform(Chirality::RightContinuous);
        assert_eq!(s.digest(8), s.digest(8));
        assert_ne!(s.digest(8), s.digest(16));
    }
}
