//! TOML run configuration. Every table rejects unknown keys.

use besselbridge::poly::Poly;
use besselbridge::spde::KFunction;
use besselbridge::{ExpFunctional, FiniteMeasure, TestFunctionH};
use serde::Deserialize;
use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub verify_mu: MuConfig,
    pub verify_ibpf: IbpfConfig,
    pub sample: SampleConfig,
    pub spde: SpdeConfig,
    pub distinction: DistinctionConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            out: PathBuf::from("out"),
            threads: None,
            verify_mu: MuConfig::default(),
            verify_ibpf: IbpfConfig::default(),
            sample: SampleConfig::default(),
            spde: SpdeConfig::default(),
            distinction: DistinctionConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MuConfig {
    pub alphas: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// Names from the built-in list: exp, gauss, poly_exp, mixed.
    pub functions: Vec<String>,
    pub gamma_x: Vec<f64>,
    pub gamma_c: Vec<f64>,
    pub tolerance: f64,
}

impl Default for MuConfig {
    fn default() -> Self {
        Self {
            alphas: (-5..=5).map(|i| i as f64 * 0.5).collect(),
            lambdas: vec![0.5, 1.0, 2.0],
            functions: ["exp", "gauss", "poly_exp", "mixed"].map(String::from).to_vec(),
            gamma_x: vec![-1.5, -0.5, 0.25, 1.5],
            gamma_c: vec![0.5, 1.0, 4.0],
            tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
}

/// `{ atoms = [[r, w], ...], density = { breaks = [...], values = [...] } }`.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(default)]
    pub atoms: Vec<[f64; 2]>,
    pub density: Option<DensitySpec>,
}

impl MeasureSpec {
    pub fn build(&self) -> Result<FiniteMeasure, CliError> {
        let atoms = self.atoms.iter().map(|a| (a[0], a[1])).collect();
        let (breaks, values) = match &self.density {
            Some(d) => (d.breaks.clone(), d.values.clone()),
            None => (vec![0.0, 1.0], vec![0.0]),
        };
        FiniteMeasure::new(atoms, breaks, values).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub coefficient: f64,
    #[serde(default)]
    pub measure: MeasureSpec,
}

/// A functional `Φ = Σ γ_i exp(-⟨m_i, X²⟩)`, either a built-in name
/// (one, leb_half, atom_half, combo) or explicit terms.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalSpec {
    pub id: String,
    pub builtin: Option<String>,
    pub terms: Option<Vec<TermSpec>>,
}

impl FunctionalSpec {
    pub fn builtin(name: &str) -> Self {
        Self { id: name.into(), builtin: Some(name.into()), terms: None }
    }

    pub fn build(&self) -> Result<ExpFunctional, CliError> {
        match (&self.builtin, &self.terms) {
            (Some(name), None) => besselbridge::ibpf::standard_functionals()
                .into_iter()
                .find(|f| f.0 == name)
                .map(|f| f.1)
                .ok_or_else(|| CliError::Config(format!("functional {}: unknown builtin {name:?}", self.id))),
            (None, Some(terms)) => {
                let terms = terms
                    .iter()
                    .map(|t| Ok((t.coefficient, t.measure.build()?)))
                    .collect::<Result<Vec<_>, CliError>>()?;
                ExpFunctional::new(terms).map_err(|e| CliError::Config(format!("functional {}: {e}", self.id)))
            }
            _ => Err(CliError::Config(format!("functional {}: give exactly one of builtin or terms", self.id))),
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum HFamilySpec {
    Poly,
    Bump,
}

/// `{ id, family = "poly" | "bump", params = [...] }`: polynomial factor
/// coefficients for `poly`, support `[a, b]` for `bump`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HSpec {
    pub id: String,
    pub family: HFamilySpec,
    #[serde(default)]
    pub params: Vec<f64>,
}

impl HSpec {
    pub fn poly() -> Self {
        Self { id: "poly".into(), family: HFamilySpec::Poly, params: vec![1.0] }
    }

    pub fn bump() -> Self {
        Self { id: "bump".into(), family: HFamilySpec::Bump, params: vec![0.25, 0.75] }
    }

    pub fn build(&self) -> Result<TestFunctionH, CliError> {
        let h = match (self.family, self.params.as_slice()) {
            (HFamilySpec::Poly, q) => TestFunctionH::poly(q),
            (HFamilySpec::Bump, &[a, b]) => TestFunctionH::bump(a, b),
            (HFamilySpec::Bump, _) => {
                return Err(CliError::Config(format!("h {}: bump takes params = [a, b]", self.id)))
            }
        };
        h.map_err(|e| CliError::Config(format!("h {}: {e}", self.id)))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSpec {
    pub paths: usize,
    pub grid_points: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IbpfConfig {
    pub deltas: Vec<f64>,
    pub functionals: Vec<FunctionalSpec>,
    pub h: Vec<HSpec>,
    pub tolerance: f64,
    pub mc: Option<McSpec>,
}

impl Default for IbpfConfig {
    fn default() -> Self {
        Self {
            deltas: vec![0.5, 0.9, 1.0, 1.1, 2.0, 2.5, 2.9, 3.0, 3.1, 3.5, 5.0],
            functionals: ["one", "leb_half", "atom_half", "combo"].map(FunctionalSpec::builtin).to_vec(),
            h: vec![HSpec::poly(), HSpec::bump()],
            tolerance: 1e-6,
            mc: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum PathKindSpec {
    Squared,
    Bessel,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectationSpec {
    pub delta: f64,
    pub functional: FunctionalSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleConfig {
    /// Paths written to `paths.csv`.
    pub delta: f64,
    pub kind: PathKindSpec,
    pub grid_points: usize,
    pub paths: usize,
    /// Marginal KS table.
    pub ks_deltas: Vec<f64>,
    pub ks_times: Vec<f64>,
    pub ks_paths: usize,
    pub additivity: Vec<[f64; 2]>,
    /// Monte Carlo of `E[Φ]` against the closed form.
    pub expectations: Vec<ExpectationSpec>,
    pub expectation_paths: usize,
    pub expectation_grid: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            delta: 1.0,
            kind: PathKindSpec::Bessel,
            grid_points: 64,
            paths: 100,
            ks_deltas: vec![0.5, 1.0, 2.0, 3.5],
            ks_times: vec![0.25, 0.5, 0.75],
            ks_paths: 100_000,
            additivity: vec![[1.0, 1.0], [1.3, 2.2]],
            expectations: vec![
                ExpectationSpec { delta: 1.0, functional: FunctionalSpec::builtin("atom_half") },
                ExpectationSpec { delta: 2.0, functional: FunctionalSpec::builtin("leb_half") },
            ],
            expectation_paths: 100_000,
            expectation_grid: 64,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ModelSpec {
    She,
    Bessel1,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpdeConfig {
    pub model: ModelSpec,
    /// `false` turns the δ = 1 drift off, which gives the heat equation.
    pub drift: bool,
    pub eps: f64,
    pub m: usize,
    pub dt: f64,
    pub t_end: f64,
    pub probes: Vec<f64>,
    pub probe_every: usize,
    pub snapshot_every: usize,
    pub replicas: usize,
    /// Defaults to `t_end / 2`.
    pub burn_in: Option<f64>,
    pub check_sites: Vec<f64>,
    pub ks_tolerance: f64,
}

impl Default for SpdeConfig {
    fn default() -> Self {
        let r = besselbridge::spde::SpdeSettings::reference();
        Self {
            model: ModelSpec::Bessel1,
            drift: true,
            eps: 0.05,
            m: r.m,
            dt: r.dt,
            t_end: r.t_end,
            probes: r.probes,
            probe_every: r.probe_every,
            snapshot_every: r.snapshot_every,
            replicas: 32,
            burn_in: None,
            check_sites: vec![0.5],
            ks_tolerance: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum KFamilySpec {
    Zero,
    Sine,
    Poly,
}

/// `{ id, family = "zero" | "sine" | "poly", n, amplitude, coefficients, min_gap }`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KSpec {
    pub id: String,
    pub family: KFamilySpec,
    pub n: Option<u32>,
    pub amplitude: Option<f64>,
    pub coefficients: Option<Vec<f64>>,
    /// Required lower bound on `|gap|` for this direction.
    pub min_gap: Option<f64>,
}

impl KSpec {
    pub fn build(&self) -> Result<KFunction, CliError> {
        let bad = |msg: &str| CliError::Config(format!("k {}: {msg}", self.id));
        match self.family {
            KFamilySpec::Zero => {
                if self.n.is_some() || self.amplitude.is_some() || self.coefficients.is_some() {
                    return Err(bad("zero takes no parameters"));
                }
                Ok(KFunction::zero())
            }
            KFamilySpec::Sine => {
                if self.coefficients.is_some() {
                    return Err(bad("sine takes n and amplitude"));
                }
                let n = self.n.ok_or_else(|| bad("sine needs n"))?;
                KFunction::sine(n, self.amplitude.unwrap_or(1.0)).map_err(|e| bad(&e.to_string()))
            }
            KFamilySpec::Poly => {
                if self.n.is_some() || self.amplitude.is_some() {
                    return Err(bad("poly takes coefficients"));
                }
                match &self.coefficients {
                    Some(c) if !c.is_empty() && c.iter().all(|x| x.is_finite()) => Ok(KFunction::Poly(Poly::new(c.clone()))),
                    _ => Err(bad("poly needs finite coefficients")),
                }
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistinctionConfig {
    pub k: Vec<KSpec>,
    pub h: Vec<HSpec>,
    pub tolerance: f64,
    pub zero_tolerance: f64,
}

impl Default for DistinctionConfig {
    fn default() -> Self {
        Self {
            k: vec![
                KSpec { id: "sin".into(), family: KFamilySpec::Sine, n: Some(1), amplitude: Some(1.0), coefficients: None, min_gap: Some(1e-3) },
                KSpec { id: "zero".into(), family: KFamilySpec::Zero, n: None, amplitude: None, coefficients: None, min_gap: None },
            ],
            h: vec![HSpec::bump()],
            tolerance: 1e-8,
            zero_tolerance: 1e-10,
        }
    }
}
