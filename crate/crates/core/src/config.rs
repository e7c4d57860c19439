//! Experiment configuration: flat `key = value` files merged with command-line overrides.
//!
//! Grammar: one `key = value` per line; `#` starts a comment; blank lines are
//! ignored; keys use `snake_case` (dashes are accepted and normalized). Values
//! are typed per key: integers, reals, comma-separated real vectors,
//! `start:stop:step` ranges (inclusive), or free text. Unknown keys are
//! rejected. Later sources override earlier ones.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::catalog;
use crate::error::{Error, Result};
use crate::system::{CohomologyClass, TonelliSystem};
use crate::weakkam::{parse_range, DiscreteActionParams, Quadrature, SolverOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Int,
    Real,
    Vector,
    Text,
}

const KEYS: &[(&str, Kind, &str)] = &[
    ("system", Kind::Text, "catalog id (free, pendulum, mech2d) or `custom`"),
    ("dim", Kind::Int, "torus dimension, 1 or 2 (default: 2 for mech2d, else 1)"),
    ("eps", Kind::Real, "coupling of mech2d"),
    ("mass", Kind::Vector, "custom: positive definite quadratic form, row-major"),
    ("shift", Kind::Vector, "custom: momentum shift a"),
    ("linear", Kind::Vector, "custom: linear momentum term"),
    ("terms", Kind::Text, "custom: `cos|sin k1[,k2] alpha [beta]` terms separated by `;`"),
    ("n", Kind::Int, "grid nodes per axis"),
    ("h", Kind::Real, "time step of the discrete action"),
    ("vmax", Kind::Real, "velocity truncation"),
    ("quadrature", Kind::Text, "simpson, midpoint or left"),
    ("c", Kind::Vector, "cohomology class"),
    ("c_grid", Kind::Text, "range per axis, or explicit classes `a,b; c,d`"),
    ("h_grid", Kind::Text, "rotation-vector range per axis, or explicit list"),
    ("delta", Kind::Real, "step of the one-sided β slopes (default 1e-3)"),
    ("tol", Kind::Real, "solver tolerance on sup|u_{k+1} - u_k| and on the width of the bracket on alpha"),
    ("max_iter", Kind::Int, "solver iteration cap"),
    ("relaxation", Kind::Real, "averaging weight of the solver, in (0, 1]"),
    ("tol_aubry", Kind::Real, "Aubry indicator threshold"),
    ("rotation_steps", Kind::Int, "minimizer backtracking length"),
    ("integrals", Kind::Text, "comma-separated observables, e.g. p1,p2"),
    ("f", Kind::Text, "observable generating a flow or first in a bracket"),
    ("g", Kind::Text, "second observable of a bracket"),
    ("x0", Kind::Vector, "initial position"),
    ("p0", Kind::Vector, "initial momentum (body momentum for rigidbody)"),
    ("t", Kind::Real, "flow time"),
    ("dt", Kind::Real, "integrator step"),
    ("seed", Kind::Int, "seed of every random or low-discrepancy sample"),
    ("output_dir", Kind::Text, "directory for CSV/JSON artifacts"),
    ("samples", Kind::Int, "size of the phase-space sample set"),
    ("momentum_box", Kind::Real, "sample momenta lie in [-P, P]"),
    ("sv_tol", Kind::Real, "relative singular-value threshold"),
    ("commutation_tol", Kind::Real, "threshold on |{H, F}|"),
    ("involution_tol", Kind::Real, "threshold on |{F, G}| over Aubry lifts"),
    ("constancy_tol", Kind::Real, "threshold on the spread of F over the graph"),
    ("graph_spacings", Kind::Real, "graph invariance threshold in grid spacings"),
    ("aubry_spacings", Kind::Real, "Aubry invariance threshold in grid spacings"),
    ("graph_seeds", Kind::Int, "points seeded on the graph"),
    ("inertia", Kind::Vector, "principal moments of inertia"),
    ("attitude", Kind::Vector, "initial attitude as an axis-angle vector"),
    ("output_stride", Kind::Int, "write every k-th rigid-body state"),
];

fn normalize_key(k: &str) -> String {
    let k = k.trim().replace('-', "_");
    if k == "N" {
        "n".into()
    } else {
        k
    }
}

fn kind_of(key: &str) -> Option<Kind> {
    KEYS.iter().find(|(k, _, _)| *k == key).map(|(_, kind, _)| *kind)
}

/// Documentation of every accepted key, one `key: description` per line.
pub fn key_reference() -> String {
    KEYS.iter().map(|(k, _, d)| format!("{k}: {d}\n")).collect()
}

/// Raw validated key/value pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

fn parse_vector(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(key, format!("`{v}` is not a comma-separated list of reals")))
        })
        .collect()
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets a key after checking it is known and its value has the right type.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = normalize_key(key);
        let kind = kind_of(&key).ok_or_else(|| Error::config(&key, "unknown key"))?;
        let value = value.trim();
        match kind {
            Kind::Int => {
                value
                    .parse::<u64>()
                    .map_err(|_| Error::config(&key, format!("`{value}` is not a nonnegative integer")))?;
            }
            Kind::Real => {
                let x = value
                    .parse::<f64>()
                    .map_err(|_| Error::config(&key, format!("`{value}` is not a real number")))?;
                if !x.is_finite() {
                    return Err(Error::config(&key, "must be finite"));
                }
            }
            Kind::Vector => {
                parse_vector(&key, value)?;
            }
            Kind::Text => {
                if value.is_empty() {
                    return Err(Error::config(&key, "empty value"));
                }
            }
        }
        self.values.insert(key, value.to_string());
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Config::new();
        cfg.merge_str(text)?;
        Ok(cfg)
    }

    /// Adds the `key = value` lines of `text`, overriding existing keys.
    pub fn merge_str(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", no + 1), format!("expected key = value, got `{line}`")))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    /// Overrides with the entries of `other`.
    pub fn merge(&mut self, other: &Config) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.raw(key)
    }

    pub fn real(&self, key: &str) -> Result<Option<f64>> {
        self.raw(key)
            .map(|v| v.parse::<f64>().map_err(|_| Error::config(key, format!("`{v}` is not a real number"))))
            .transpose()
    }

    pub fn real_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.real(key)?.unwrap_or(default))
    }

    pub fn int(&self, key: &str) -> Result<Option<u64>> {
        self.raw(key)
            .map(|v| v.parse::<u64>().map_err(|_| Error::config(key, format!("`{v}` is not an integer"))))
            .transpose()
    }

    pub fn int_or(&self, key: &str, default: u64) -> Result<u64> {
        Ok(self.int(key)?.unwrap_or(default))
    }

    pub fn vector(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key).map(|v| parse_vector(key, v)).transpose()
    }

    /// Hex sha256 of the canonical `key=value` lines (sorted by key), prefixed by `scope`.
    pub fn hash(&self, scope: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(scope.as_bytes());
        hasher.update(b"\n");
        for (k, v) in &self.values {
            hasher.update(format!("{k}={v}\n").as_bytes());
        }
        hex::encode(hasher.finalize())
    }

    pub fn seed(&self) -> Result<u64> {
        self.int_or("seed", 0)
    }

    /// `dim`, defaulting to the dimension the catalog system requires, else 1.
    pub fn dim(&self) -> Result<usize> {
        let fallback = if self.text("system") == Some("mech2d") { 2 } else { 1 };
        let d = self.int_or("dim", fallback)? as usize;
        if !(1..=2).contains(&d) {
            return Err(Error::config("dim", "must be 1 or 2"));
        }
        Ok(d)
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(self.text("output_dir").unwrap_or("."))
    }

    /// The system named by `system`, built from `mass`/`shift`/`linear`/`terms` when custom.
    pub fn system(&self) -> Result<TonelliSystem> {
        let id = self.text("system").ok_or_else(|| Error::config("system", "missing"))?;
        let dim = self.dim()?;
        if id != "custom" {
            return catalog::system(id, dim, self.real_or("eps", 0.1)?);
        }
        let mass = match self.vector("mass")? {
            Some(m) if m.len() == dim * dim => DMatrix::from_row_slice(dim, dim, &m),
            Some(m) => {
                return Err(Error::config("mass", format!("expected {} entries, got {}", dim * dim, m.len())))
            }
            None => DMatrix::identity(dim, dim),
        };
        let vec_or_zero = |key: &str| -> Result<Vec<f64>> {
            match self.vector(key)? {
                Some(v) if v.len() == dim => Ok(v),
                Some(v) => Err(Error::config(key, format!("expected {dim} entries, got {}", v.len()))),
                None => Ok(vec![0.0; dim]),
            }
        };
        let terms = match self.text("terms") {
            Some(t) => catalog::parse_terms(t, dim)?,
            None => vec![],
        };
        let poly = catalog::TrigPolynomial::new(mass, vec_or_zero("shift")?, vec_or_zero("linear")?, terms)?;
        catalog::tonelli_from_trig("custom", poly)
    }

    /// Grid parameters; 2-D defaults are coarser so the reach set stays small.
    pub fn action_params(&self, dim: usize) -> Result<DiscreteActionParams> {
        let (n, h, vmax) = if dim == 1 { (256, 0.1, 4.0) } else { (64, 0.05, 2.0) };
        let quadrature = match self.text("quadrature").unwrap_or("simpson") {
            "simpson" => Quadrature::Simpson,
            "midpoint" => Quadrature::Midpoint,
            "left" => Quadrature::LeftPoint,
            other => return Err(Error::config("quadrature", format!("unknown rule `{other}`"))),
        };
        let params = DiscreteActionParams::new(
            self.real_or("h", h)?,
            self.real_or("vmax", vmax)?,
            self.int_or("n", n)? as usize,
        )
        .with_quadrature(quadrature);
        params.validate()?;
        Ok(params)
    }

    pub fn solver_options(&self) -> Result<SolverOptions> {
        let d = SolverOptions::default();
        Ok(SolverOptions {
            tol: self.real_or("tol", d.tol)?,
            max_iter: self.int_or("max_iter", d.max_iter as u64)? as usize,
            relaxation: self.real_or("relaxation", d.relaxation)?,
            tol_aubry: self.real("tol_aubry")?,
            rotation_steps: self.int("rotation_steps")?.map(|v| v as usize),
        })
    }

    /// The single class `c`, defaulting to zero.
    pub fn class(&self, dim: usize) -> Result<CohomologyClass> {
        match self.vector("c")? {
            Some(v) if v.len() == dim => CohomologyClass::new(v),
            Some(v) => Err(Error::config("c", format!("expected {dim} entries, got {}", v.len()))),
            None => Ok(CohomologyClass::zero(dim)),
        }
    }

    /// Classes from `c_grid`, falling back to `c`.
    pub fn class_grid(&self, dim: usize) -> Result<Vec<CohomologyClass>> {
        match self.text("c_grid") {
            Some(spec) => point_grid("c_grid", spec, dim)?
                .into_iter()
                .map(CohomologyClass::new)
                .collect(),
            None => Ok(vec![self.class(dim)?]),
        }
    }

    pub fn rotation_grid(&self, dim: usize) -> Result<Vec<Vec<f64>>> {
        let spec = self.text("h_grid").ok_or_else(|| Error::config("h_grid", "missing"))?;
        point_grid("h_grid", spec, dim)
    }
}

/// `start:stop:step` (every axis), `r1 x r2` (one range per axis), or explicit
/// points `a,b; c,d`.
pub fn point_grid(key: &str, spec: &str, dim: usize) -> Result<Vec<Vec<f64>>> {
    if spec.contains(':') {
        let axes: Vec<&str> = spec.split('x').map(str::trim).collect();
        let ranges: Vec<Vec<f64>> = match axes.len() {
            1 => vec![parse_range(key, axes[0])?; dim],
            n if n == dim => axes.iter().map(|a| parse_range(key, a)).collect::<Result<_>>()?,
            n => return Err(Error::config(key, format!("{n} ranges for dimension {dim}"))),
        };
        Ok(if dim == 1 {
            ranges[0].iter().map(|v| vec![*v]).collect()
        } else {
            ranges[0]
                .iter()
                .flat_map(|a| ranges[1].iter().map(move |b| vec![*a, *b]))
                .collect()
        })
    } else {
        let sep = if dim == 1 && !spec.contains(';') { ',' } else { ';' };
        spec.split(sep)
            .map(|item| {
                let v = parse_vector(key, item)?;
                if v.len() != dim {
                    return Err(Error::config(key, format!("`{item}` has {} entries, expected {dim}", v.len())));
                }
                Ok(v)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let mut cfg = Config::parse_str("# experiment\nsystem = pendulum\nN = 128 # grid\n\nh=0.2\n").unwrap();
        assert_eq!(cfg.int("n").unwrap(), Some(128));
        let mut flags = Config::new();
        flags.set("N", "64").unwrap();
        cfg.merge(&flags);
        assert_eq!(cfg.action_params(1).unwrap().n, 64);
        assert_eq!(cfg.action_params(1).unwrap().h, 0.2);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_types() {
        let e = Config::parse_str("sytem = free").unwrap_err();
        assert!(matches!(e, Error::Config { ref key, .. } if key == "sytem"));
        let e = Config::parse_str("N = many").unwrap_err();
        assert!(matches!(e, Error::Config { ref key, .. } if key == "n"));
        assert!(Config::parse_str("h = inf").is_err());
        assert!(Config::parse_str("just text").is_err());
        assert!(Config::parse_str("c = 0.1,x").is_err());
    }

    #[test]
    fn grids() {
        let g = point_grid("c_grid", "-1:1:0.5", 1).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(point_grid("c_grid", "0:1:0.5", 2).unwrap().len(), 9);
        assert_eq!(point_grid("c_grid", "0:1:0.5 x 0:0:1", 2).unwrap().len(), 3);
        assert_eq!(point_grid("c_grid", "0,0; 0.3,0.4", 2).unwrap()[1], vec![0.3, 0.4]);
        assert_eq!(point_grid("c_grid", "0.1,0.2,0.3", 1).unwrap().len(), 3);
        assert!(point_grid("c_grid", "0,0,1", 2).is_err());
    }

    #[test]
    fn hash_depends_on_content_only() {
        let a = Config::parse_str("system=free\ndim=2").unwrap();
        let b = Config::parse_str("dim = 2\nsystem = free\n").unwrap();
        assert_eq!(a.hash("check"), b.hash("check"));
        assert_ne!(a.hash("check"), a.hash("alpha"));
        assert_eq!(a.hash("x").len(), 64);
    }

    #[test]
    fn custom_system_from_coefficients() {
        let cfg = Config::parse_str("system=custom\ndim=1\nterms=cos 1 1.0").unwrap();
        let sys = cfg.system().unwrap();
        let pend = catalog::pendulum();
        for x in [0.0, 0.3, 0.71] {
            assert!((sys.energy_at(&[x], &[0.4]) - pend.energy_at(&[x], &[0.4])).abs() < 1e-15);
        }
        assert!(Config::parse_str("system=custom\ndim=1\nmass=-1").unwrap().system().is_err());
        assert!(Config::parse_str("system=rotor").unwrap().system().unwrap_err().is_config());
    }

    #[test]
    fn two_dimensional_defaults_are_small() {
        let p = Config::new().action_params(2).unwrap();
        assert!(p.vmax * p.h * p.n as f64 <= 8.0);
    }
}
