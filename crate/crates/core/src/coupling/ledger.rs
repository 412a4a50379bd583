use serde::Serialize;

/// Running Girsanov sums for one coupled path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct GirsanovLedger {
    /// `Σ ⟨ψ(t_k), ΔW_k⟩`.
    pub stoch_integral: f64,
    /// `Σ |ψ(t_k)|² dt`.
    pub quad_var: f64,
    pub steps: usize,
    pub log_r: Option<f64>,
}

impl GirsanovLedger {
    #[inline]
    pub fn add(&mut self, psi: &[f64], dw: &[f64], dt: f64) {
        let mut s = 0.0;
        let mut q = 0.0;
        for (p, w) in psi.iter().zip(dw) {
            s += p * w;
            q += p * p;
        }
        self.stoch_integral += s;
        self.quad_var += q * dt;
        self.steps += 1;
    }

    pub fn finalize(&mut self) -> f64 {
        let v = -self.stoch_integral - 0.5 * self.quad_var;
        self.log_r = Some(v);
        v
    }
}

/// `log R(T) = −Σ⟨ψ, ΔW⟩ − ½ Σ|ψ|² dt`.
pub fn girsanov_log_weight(ledger: &GirsanovLedger) -> f64 {
    ledger.log_r.unwrap_or(-ledger.stoch_integral - 0.5 * ledger.quad_var)
}
