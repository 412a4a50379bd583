//! Scenario configuration. Every block has defaults reproducing the
//! reference model (four modes, `λ_k = k²`, `A₁ = A₂`, `B = Q = I`,
//! `r = 0.5`, `T = 2`, `dt = 10⁻³`); unknown keys are rejected.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelConfig,
    pub delay: DelayConfig,
    pub coefficients: CoefficientsConfig,
    pub simulation: SimulationConfig,
    pub experiment: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub eigenvalues: EigenLaw,
    /// Trace exponent ε of the truncated trace condition.
    pub epsilon: f64,
    pub a1: MatrixSpec,
    pub b: MatrixSpec,
    pub q: MatrixSpec,
    /// Derived from the intertwining relation when absent.
    pub a0: Option<MatrixSpec>,
    pub delta: f64,
    /// First truncation level at which block commutation is checked.
    pub n0: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n1: 4,
            n2: 4,
            n3: 4,
            eigenvalues: EigenLaw::default(),
            epsilon: 0.25,
            a1: MatrixSpec::SameAsA2,
            b: MatrixSpec::Identity,
            q: MatrixSpec::Identity,
            a0: None,
            delta: 1.0,
            n0: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EigenLaw {
    /// `λ_k = scale · k^exponent`.
    Power {
        scale: f64,
        exponent: f64,
    },
    Explicit {
        values: Vec<f64>,
    },
}

impl Default for EigenLaw {
    fn default() -> Self {
        EigenLaw::Power {
            scale: 1.0,
            exponent: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MatrixSpec {
    /// Rectangular identity `[I 0]`.
    Identity,
    Zero,
    /// Only meaningful for `A₁`.
    SameAsA2,
    /// `A₂ + shift·I`; only meaningful for `A₁`.
    ShiftedA2 {
        shift: f64,
    },
    Scaled {
        scale: f64,
    },
    Diagonal {
        values: Vec<f64>,
    },
    Dense {
        rows: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelayConfig {
    pub r: f64,
    pub family: DelayFamily,
    /// Number of midpoint cells discretizing an absolutely continuous ν.
    pub cells: usize,
}

impl Default for DelayConfig {
    fn default() -> Self {
        DelayConfig {
            r: 0.5,
            family: DelayFamily::Lebesgue,
            cells: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DelayFamily {
    /// Lebesgue measure on `[−r, 0)`, `κ ≡ 1`.
    Lebesgue,
    /// Density `e^{rate·θ}` on `[−r, 0)`, `κ(t) = max(1, e^{−rate·t})`.
    Exponential { rate: f64 },
    /// Point masses at grid-aligned `θ < 0`, constant `κ`.
    Atoms {
        positions: Vec<f64>,
        masses: Vec<f64>,
        #[serde(default = "one")]
        kappa: f64,
    },
    /// `supp ν = {0}`; requires `r = 0`.
    None,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoefficientsConfig {
    pub drift: DriftConfig,
    pub functional: FunctionalConfig,
    /// Pair samples for the (A3)/(A4) checker.
    pub check_samples: usize,
}

impl Default for CoefficientsConfig {
    fn default() -> Self {
        CoefficientsConfig {
            drift: DriftConfig::default(),
            functional: FunctionalConfig::default(),
            check_samples: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiniConfig {
    pub k: f64,
    pub delta: f64,
    /// Offset `c`; defaults to `e³`.
    pub c: Option<f64>,
}

impl Default for DiniConfig {
    fn default() -> Self {
        DiniConfig {
            k: 1.0,
            delta: 1.0,
            c: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DriftConfig {
    Zero,
    Constant {
        value: Vec<f64>,
    },
    /// `b = amplitude · sin(|x|^power) · u`, claimed Hölder exponent `alpha`.
    SinHolder {
        amplitude: f64,
        #[serde(default = "one")]
        power: f64,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default)]
        direction: Option<Vec<f64>>,
    },
    /// `b = (amp_x · sin(|x|^alpha) + amp_y · φ₁(|y|)) · u`.
    DiniLog {
        amp_x: f64,
        amp_y: f64,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default)]
        modulus: DiniConfig,
        #[serde(default)]
        direction: Option<Vec<f64>>,
    },
}

fn default_alpha() -> f64 {
    0.8
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig::DiniLog {
            amp_x: 0.2,
            amp_y: 0.2,
            alpha: default_alpha(),
            modulus: DiniConfig::default(),
            direction: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionalConfig {
    Zero,
    /// `F(ξ) = c0 · Σ_j w_j ξ_y(θ_j)`.
    LinearAverage {
        c0: f64,
        /// Claimed Lipschitz constant; defaults to the sharp `c0·√ν([−r,0))`.
        #[serde(default)]
        lipschitz: Option<f64>,
    },
}

impl Default for FunctionalConfig {
    fn default() -> Self {
        FunctionalConfig::LinearAverage {
            c0: 0.5,
            lipschitz: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub initial: InitialConfig,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            dt: 1e-3,
            horizon: 2.0,
            n_paths: 10_000,
            seed: 20_240_601,
            initial: InitialConfig::default(),
        }
    }
}

/// Constant initial segment `ξ(θ) = (x, y)`; empty vectors are filled
/// with `level`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub simulate: SimulateConfig,
    pub coupling: CouplingCheckConfig,
    pub harnack: HarnackConfig,
    pub shift: ShiftConfig,
    pub zvonkin: ZvonkinConfig,
    pub bihari: BihariConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// Paths written to `paths.csv`.
    pub export_paths: usize,
    /// Output stride in steps for `paths.csv`.
    pub stride: usize,
    /// Step sizes of the strong-order study.
    pub order_dts: Vec<f64>,
    pub order_paths: usize,
    pub order_horizon: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            export_paths: 4,
            stride: 10,
            order_dts: vec![1e-1, 1e-2, 1e-3, 1e-4],
            order_paths: 32,
            order_horizon: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingCheckConfig {
    pub draws: usize,
    pub h_scale: f64,
    pub eta_scale: f64,
    /// Paths for the normalization check `E R(T) = 1`.
    pub n_paths: usize,
    pub h_magnitudes: Vec<f64>,
}

impl Default for CouplingCheckConfig {
    fn default() -> Self {
        CouplingCheckConfig {
            draws: 20,
            h_scale: 1.0,
            eta_scale: 0.5,
            n_paths: 10_000,
            h_magnitudes: vec![0.1, 0.5, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TestFunctionalConfig {
    Constant {
        value: f64,
    },
    /// `floor + exp(−|z(0) − centre|²/width)`; centre defaults to the
    /// noiseless linear flow at `T`.
    GaussianBump {
        #[serde(default)]
        centre: Option<Vec<f64>>,
        width: f64,
        #[serde(default)]
        floor: f64,
    },
    /// `floor + min(|z(0)|², cap)`.
    ClippedNormSq {
        cap: f64,
        #[serde(default)]
        floor: f64,
    },
    /// `offset + clamp(z_i(0), lo, hi)`.
    ClippedCoord {
        index: usize,
        lo: f64,
        hi: f64,
        offset: f64,
    },
    /// `floor + exp(−‖ξ − centre‖²_ν / width)` on the whole segment.
    SegmentBump {
        #[serde(default)]
        centre: Option<Vec<f64>>,
        width: f64,
        #[serde(default)]
        floor: f64,
    },
}

pub fn default_test_functionals() -> Vec<TestFunctionalConfig> {
    vec![
        TestFunctionalConfig::GaussianBump {
            centre: None,
            width: 2.0,
            floor: 0.1,
        },
        TestFunctionalConfig::ClippedNormSq { cap: 4.0, floor: 0.1 },
        TestFunctionalConfig::ClippedCoord {
            index: 0,
            lo: -2.0,
            hi: 2.0,
            offset: 3.0,
        },
        TestFunctionalConfig::ClippedCoord {
            index: 4,
            lo: -2.0,
            hi: 2.0,
            offset: 3.0,
        },
        TestFunctionalConfig::SegmentBump {
            centre: None,
            width: 4.0,
            floor: 0.1,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnackConfig {
    /// `|h(0)|` values; `h` is constant along the segment.
    pub h_magnitudes: Vec<f64>,
    /// Direction of `h` in `ℝ^{n1+n2}`; normalized ones when absent.
    pub direction: Option<Vec<f64>>,
    pub p_list: Vec<f64>,
    pub functionals: Vec<TestFunctionalConfig>,
    /// Index into `functionals` used for the inequality rows.
    pub inequality_functional: usize,
    /// Constant of the explicit bound; calibrated when absent.
    pub bound_constant: Option<f64>,
    pub z: f64,
    pub f_min: f64,
    pub n_paths: usize,
}

impl Default for HarnackConfig {
    fn default() -> Self {
        HarnackConfig {
            h_magnitudes: vec![0.0, 0.1, 0.5, 1.0],
            direction: None,
            p_list: vec![1.5, 2.0, 4.0],
            functionals: default_test_functionals(),
            inequality_functional: 0,
            bound_constant: None,
            z: 3.0,
            f_min: 1e-6,
            n_paths: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftConfig {
    pub eta_scales: Vec<f64>,
    /// Direction of `η`; `(e₁, e₁)/√2` when absent.
    pub direction: Option<Vec<f64>>,
    pub p_list: Vec<f64>,
    pub functionals: Vec<TestFunctionalConfig>,
    pub inequality_functional: usize,
    pub bound_constant: Option<f64>,
    pub z: f64,
    pub f_min: f64,
    pub n_paths: usize,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        ShiftConfig {
            eta_scales: vec![0.0, 0.25, 0.5, 1.0],
            direction: None,
            p_list: vec![2.0],
            functionals: default_test_functionals(),
            inequality_functional: 0,
            bound_constant: None,
            z: 3.0,
            f_min: 1e-6,
            n_paths: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZvonkinConfig {
    pub lambdas: Vec<f64>,
    pub half_width: f64,
    pub points_per_axis: usize,
    pub time_steps: usize,
    pub horizon: f64,
    pub hermite_order: usize,
    pub max_iters: usize,
    pub tol: f64,
    /// Upper bound for every column of the last decay row.
    pub threshold: f64,
    /// Constant drift level used by the closed-form check.
    pub constant_level: f64,
    pub constant_lambda: f64,
}

impl Default for ZvonkinConfig {
    fn default() -> Self {
        ZvonkinConfig {
            lambdas: vec![1.0, 10.0, 100.0],
            half_width: 4.0,
            points_per_axis: 33,
            time_steps: 20,
            horizon: 1.0,
            hermite_order: 8,
            max_iters: 60,
            tol: 1e-10,
            threshold: 0.05,
            constant_level: 0.7,
            constant_lambda: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BihariConfig {
    pub n_paths: usize,
    /// Growth pair; derived from the coefficient constants when absent.
    pub growth: Option<GrowthConfig>,
    /// Factor applied to α in the falsification control.
    pub falsify_factor: f64,
    pub check_samples: usize,
    /// Constant level of the initial segment used by this experiment.
    pub initial_level: f64,
}

impl Default for BihariConfig {
    fn default() -> Self {
        BihariConfig {
            n_paths: 100,
            growth: None,
            falsify_factor: 0.5,
            check_samples: 2000,
            initial_level: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthConfig {
    pub phi: PhiFamily,
    pub h: HFamily,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PhiFamily {
    Constant {
        c: f64,
    },
    /// `c (1 + s)`.
    Affine {
        c: f64,
    },
    /// `c (1 + s) log(e + s)`.
    LogAffine {
        c: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HFamily {
    Constant {
        c: f64,
    },
    /// `a + b s²`.
    Quadratic {
        a: f64,
        b: f64,
    },
}
