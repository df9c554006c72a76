//! Run configuration: a TOML document that fully determines a CLI run.

use crate::error::{LabError, Result};
use crate::geometry::{ConformalFactor, FactorForm, DEFAULT_DEGREE};
use crate::stability::{Mode, StabilityOptions};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Spectrum,
    Compare,
    Stability,
    Kernel,
    MuntzTable,
}

impl Subcommand {
    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Spectrum => "spectrum",
            Subcommand::Compare => "compare",
            Subcommand::Stability => "stability",
            Subcommand::Kernel => "kernel",
            Subcommand::MuntzTable => "muntz-table",
        }
    }
}

/// How f̃_δ is built from the base factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Family {
    /// f + δ sin⁴(πx)
    SymmetricBump,
    /// f + δ sin⁴(πx) cos(πx)
    PinnedBump,
    /// f + δ·perturbation
    Custom { perturbation: FactorForm },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Constant ε for `compare`; measured when absent.
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default = "default_endpoint_tol")]
    pub endpoint: f64,
    #[serde(default = "default_kernel_tol")]
    pub kernel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eps: None,
            endpoint: default_endpoint_tol(),
            kernel: default_kernel_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_family")]
    pub family: Family,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "default_kernel_grid_stab")]
    pub kernel_grid: usize,
    #[serde(default)]
    pub class_a: Option<f64>,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            mode: default_mode(),
            family: default_family(),
            deltas: default_deltas(),
            kernel_grid: default_kernel_grid_stab(),
            class_a: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default = "default_kernel_grid")]
    pub grid: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            grid: default_kernel_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuntzConfig {
    #[serde(default)]
    pub m0: u32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// m range for the exponential rate fit; skipped when absent.
    #[serde(default)]
    pub rate_range: Option<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    #[serde(default)]
    pub json: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_out(),
            json: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub subcommand: Option<Subcommand>,
    #[serde(default)]
    pub factor: Option<FactorForm>,
    #[serde(default)]
    pub factor_tilde: Option<FactorForm>,
    #[serde(default = "default_n")]
    pub n: u32,
    #[serde(default)]
    pub omega: f64,
    #[serde(default = "default_m_max")]
    pub m_max: u32,
    #[serde(default = "default_degree")]
    pub degree: usize,
    /// Seed for random test families; when set and no factor is given, a random C(A) factor is used.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub stability: StabilityConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub muntz: MuntzConfig,
    #[serde(default)]
    pub compare: CompareConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_endpoint_tol() -> f64 {
    1e-10
}
fn default_kernel_tol() -> f64 {
    1e-10
}
fn default_mode() -> Mode {
    Mode::Steklov
}
fn default_family() -> Family {
    Family::SymmetricBump
}
fn default_deltas() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4]
}
fn default_kernel_grid_stab() -> usize {
    256
}
fn default_kernel_grid() -> usize {
    crate::transform::DEFAULT_GRID
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_n() -> u32 {
    3
}
fn default_m_max() -> u32 {
    40
}
fn default_degree() -> usize {
    DEFAULT_DEGREE
}

const M_MAX_LIMIT: u32 = 5000;

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config uses defaults")
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// sha256 of the canonical (key-sorted, compact) JSON form.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }

    /// Checks that do not depend on the subcommand, plus the ones for `sub`.
    pub fn validate(&self, sub: Subcommand) -> Result<()> {
        let bad = |m: String| Err(LabError::Config(m));
        if self.n < 2 {
            return bad(format!("n = {} must be at least 2", self.n));
        }
        if !self.omega.is_finite() {
            return bad("omega must be finite".into());
        }
        if self.m_max > M_MAX_LIMIT {
            return bad(format!("m_max = {} exceeds {M_MAX_LIMIT}", self.m_max));
        }
        if self.degree < 8 {
            return bad(format!("series degree {} too small", self.degree));
        }
        if let Some(e) = self.tolerances.eps {
            if !(e >= 0.0) {
                return bad(format!("eps = {e} must be non-negative"));
            }
        }
        match sub {
            Subcommand::Compare if self.factor_tilde.is_none() => {
                bad("compare needs factor_tilde".into())
            }
            Subcommand::Stability => {
                let st = &self.stability;
                if st.deltas.is_empty() {
                    return bad("stability.deltas is empty".into());
                }
                if let Some(d) = st.deltas.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
                    return bad(format!("stability delta {d} must be positive"));
                }
                if st.kernel_grid < 4 {
                    return bad(format!(
                        "stability.kernel_grid = {} too small",
                        st.kernel_grid
                    ));
                }
                Ok(())
            }
            Subcommand::Kernel if self.kernel.grid < 2 => {
                bad(format!("kernel.grid = {} too small", self.kernel.grid))
            }
            Subcommand::MuntzTable if self.m_max < self.muntz.m0 => bad(format!(
                "m_max = {} below muntz.m0 = {}",
                self.m_max, self.muntz.m0
            )),
            _ => Ok(()),
        }
    }

    /// The base factor: explicit, random from `seed`, or the default symmetric profile.
    pub fn base_form(&self) -> FactorForm {
        if let Some(f) = &self.factor {
            return f.clone();
        }
        match self.seed {
            Some(seed) => {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                crate::families::random_factor_form(&mut rng, 0.15)
            }
            None => crate::families::symmetric_base(),
        }
    }

    pub fn base_factor(&self) -> Result<ConformalFactor> {
        ConformalFactor::from_form(self.base_form(), self.degree)
    }

    pub fn tilde_factor(&self) -> Result<Option<ConformalFactor>> {
        self.factor_tilde
            .clone()
            .map(|f| ConformalFactor::from_form(f, self.degree))
            .transpose()
    }

    /// f̃_δ for the configured family.
    pub fn family_member(&self, delta: f64) -> Result<ConformalFactor> {
        let base = self.base_form();
        let pert = match &self.stability.family {
            Family::SymmetricBump => crate::families::symmetric_bump(delta),
            Family::PinnedBump => crate::families::pinned_asymmetric_bump(delta),
            Family::Custom { perturbation } => {
                let b = ConformalFactor::from_form(base, self.degree)?;
                let p =
                    crate::geometry::ChebSeries::from_fn(|x| perturbation.value(x), self.degree);
                return ConformalFactor::from_series(b.series.add(&p.scale(delta)));
            }
        };
        ConformalFactor::from_form(
            FactorForm::Sum {
                terms: vec![base, pert],
            },
            self.degree,
        )
    }

    pub fn stability_options(&self) -> StabilityOptions {
        StabilityOptions {
            m_max: self.m_max,
            kernel_grid: self.stability.kernel_grid,
            class_a: self.stability.class_a,
            endpoint_tol: self.tolerances.endpoint,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_hashes() {
        let c = RunConfig::from_toml(
            r#"
            n = 4
            [factor]
            kind = "affine"
            a = 1.0
            b = 0.5
            [stability]
            deltas = [0.01]
            "#,
        )
        .unwrap();
        assert_eq!(c.n, 4);
        assert_eq!(c.m_max, 40);
        assert!(c.validate(Subcommand::Stability).is_ok());
        let again = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.hash(), c.hash());
        assert_eq!(c.hash().len(), 64);
        assert_ne!(RunConfig::default().hash(), c.hash());
    }

    #[test]
    fn validation_errors() {
        let c = RunConfig::from_toml("[stability]\ndeltas = []").unwrap();
        assert!(matches!(
            c.validate(Subcommand::Stability),
            Err(LabError::Config(_))
        ));
        assert!(c.validate(Subcommand::Spectrum).is_ok());
        assert!(RunConfig::from_toml("bogus = 1").is_err());
        assert!(RunConfig::from_toml("n = 1")
            .unwrap()
            .validate(Subcommand::Spectrum)
            .is_err());
        assert!(RunConfig::default().validate(Subcommand::Compare).is_err());
    }

    #[test]
    fn families() {
        let mut c = RunConfig::default();
        let f = c.family_member(1e-3).unwrap();
        assert!(f.is_symmetric(1e-12));
        c.stability.family = Family::Custom {
            perturbation: FactorForm::Affine { a: 0.0, b: 1.0 },
        };
        let g = c.family_member(0.1).unwrap();
        let base = c.base_factor().unwrap();
        assert!((g.eval(1.0) - base.eval(1.0) - 0.1).abs() < 1e-12);
    }
}
