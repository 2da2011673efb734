//! Model parameterization of the Boussinesq/Full-dispersion (B/FD) family.
//!
//! The family is generated by three modelling parameters (α₁, α₂, β) that fix
//! the four dispersion coefficients
//!
//!   a = (1 − α₁ − 3β)/3,  b = α₁/3,  c = βα₂,  d = β(1 − α₂),
//!
//! together with the density ratio γ ∈ (0,1) and the regime parameters
//! ε, μ, μ₂ of the scaled system.  The signs of (b, d, a, c) decide linear
//! well-posedness and select one of sixteen classification rows.

use crate::error::{Error, Result};
use serde::Serialize;

/// Absolute tolerance used when deciding whether a coefficient is zero.
pub const SIGN_TOLERANCE: f64 = 1e-14;

/// Modelling parameters (α₁, α₂, β) with the admissibility box
/// α₁ ≥ 0, α₂ ≤ 1, β ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelingParameters {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta: f64,
}

impl ModelingParameters {
    pub fn new(alpha1: f64, alpha2: f64, beta: f64) -> Result<Self> {
        if !alpha1.is_finite() || alpha1 < 0.0 {
            return Err(Error::ParameterDomain(format!("alpha1 = {alpha1} must be >= 0")));
        }
        if !alpha2.is_finite() || alpha2 > 1.0 {
            return Err(Error::ParameterDomain(format!("alpha2 = {alpha2} must be <= 1")));
        }
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::ParameterDomain(format!("beta = {beta} must be >= 0")));
        }
        Ok(Self { alpha1, alpha2, beta })
    }

    /// Dispersion coefficients (a, b, c, d) determined by (α₁, α₂, β).
    pub fn derive_abcd(&self) -> (f64, f64, f64, f64) {
        let a = (1.0 - self.alpha1 - 3.0 * self.beta) / 3.0;
        let b = self.alpha1 / 3.0;
        let c = self.beta * self.alpha2;
        let d = self.beta * (1.0 - self.alpha2);
        (a, b, c, d)
    }
}

/// A fully specified B/FD system: dispersion coefficients, density ratio,
/// and regime parameters of the scaled equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbcdSystem {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// Density ratio of the upper to the lower layer, in (0, 1).
    pub gamma: f64,
    pub epsilon: f64,
    pub mu: f64,
    pub mu2: f64,
    /// d − b; zero exactly in the Hamiltonian case.
    pub epsilon_db: f64,
}

impl AbcdSystem {
    pub fn new(
        a: f64,
        b: f64,
        c: f64,
        d: f64,
        gamma: f64,
        epsilon: f64,
        mu: f64,
        mu2: f64,
    ) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::ParameterDomain(format!("gamma = {gamma} must lie in (0, 1)")));
        }
        // epsilon = 0 switches the nonlinearity off, which the linear test
        // oracles rely on; mu and mu2 sit under roots and denominators.
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::ParameterDomain(format!("epsilon = {epsilon} must be >= 0")));
        }
        for (name, v) in [("mu", mu), ("mu2", mu2)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::ParameterDomain(format!("{name} = {v} must be > 0")));
            }
        }
        for (name, v) in [("a", a), ("b", b), ("c", c), ("d", d)] {
            if !v.is_finite() {
                return Err(Error::ParameterDomain(format!("{name} = {v} must be finite")));
            }
        }
        Ok(Self { a, b, c, d, gamma, epsilon, mu, mu2, epsilon_db: d - b })
    }

    /// Build a system from modelling parameters.
    pub fn from_modeling(
        p: &ModelingParameters,
        gamma: f64,
        epsilon: f64,
        mu: f64,
        mu2: f64,
    ) -> Result<Self> {
        let (a, b, c, d) = p.derive_abcd();
        Self::new(a, b, c, d, gamma, epsilon, mu, mu2)
    }

    /// The one-parameter experimental family: α₁ = 1, α₂ = −1/2, ε = μ = 1,
    /// μ₂ = 10, and β = (2/3)(1/3 + ε_{d−b}), so that
    ///
    ///   a = −β,  b = 1/3,  c = −β/2,  d = b + ε_{d−b}.
    ///
    /// ε_{d−b} = 0 gives the Hamiltonian member.
    pub fn reduced(epsilon_db: f64, gamma: f64) -> Result<Self> {
        let beta = (2.0 / 3.0) * (1.0 / 3.0 + epsilon_db);
        if !(beta >= 0.0) {
            return Err(Error::ParameterDomain(format!(
                "epsilon_db = {epsilon_db} gives beta = {beta} < 0"
            )));
        }
        let b = 1.0 / 3.0;
        let mut sys = Self::new(-beta, b, -beta / 2.0, b + epsilon_db, gamma, 1.0, 1.0, 10.0)?;
        sys.epsilon_db = epsilon_db;
        Ok(sys)
    }

    /// Modelling parameters of the reduced family for a given ε_{d−b}.
    pub fn reduced_modeling(epsilon_db: f64) -> Result<ModelingParameters> {
        ModelingParameters::new(1.0, -0.5, (2.0 / 3.0) * (1.0 / 3.0 + epsilon_db))
    }

    /// True iff b = d within [`SIGN_TOLERANCE`]; the system then carries a
    /// Hamiltonian structure.
    pub fn is_hamiltonian(&self) -> bool {
        (self.b - self.d).abs() <= SIGN_TOLERANCE
    }

    /// Linear well-posedness requires b, d ≥ 0 and a, c ≤ 0.
    pub fn is_linearly_well_posed(&self) -> bool {
        self.b >= -SIGN_TOLERANCE
            && self.d >= -SIGN_TOLERANCE
            && self.a <= SIGN_TOLERANCE
            && self.c <= SIGN_TOLERANCE
    }

    /// √(μ/μ₂).  The ratio μ/μ₂ itself is [`Self::nu_ratio`]; the square root
    /// is what enters the speed-limit theory.
    pub fn nu_sqrt(&self) -> f64 {
        (self.mu / self.mu2).sqrt()
    }

    /// μ/μ₂.
    pub fn nu_ratio(&self) -> f64 {
        self.mu / self.mu2
    }

    /// Classify this system against the sixteen-row sign table.
    pub fn classify(&self) -> Result<SystemClass> {
        classify_signs(self.a, self.b, self.c, self.d)
    }
}

/// Sign of a coefficient after zero-snapping at [`SIGN_TOLERANCE`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sign {
    Positive,
    Zero,
    Negative,
}

impl Sign {
    fn of(v: f64) -> Sign {
        if v.abs() <= SIGN_TOLERANCE {
            Sign::Zero
        } else if v > 0.0 {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }

    fn glyph(&self) -> char {
        match self {
            Sign::Positive => '+',
            Sign::Zero => '0',
            Sign::Negative => '-',
        }
    }
}

/// Sign pattern of (b, d, a, c), in the classification table's column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SignPattern {
    pub b: Sign,
    pub d: Sign,
    pub a: Sign,
    pub c: Sign,
}

impl std::fmt::Display for SignPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "(b{},d{},a{},c{})",
            self.b.glyph(),
            self.d.glyph(),
            self.a.glyph(),
            self.c.glyph()
        )
    }
}

/// One row of the classification table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemClass {
    /// Row index 1..=16.
    pub row_index: usize,
    pub sign_pattern: SignPattern,
    /// Whether the row is relevant for internal waves.
    pub relevant: bool,
    /// Sobolev-pair label of the known local well-posedness theory; empty
    /// when no theory is cited for the row.
    pub wellposedness_label: String,
}

/// (relevant, label) per row, indexed by row − 1.
const CLASS_ROWS: [(bool, &str); 16] = [
    (true, "H^s x H^s, s >= 0 (generic B/FD)"),
    (true, "H^s x H^{s-1}, s >= 0"),
    (true, "H^s x H^s, s >= 0"),
    (true, "H^{s-1} x H^s, s >= 0 (BBM-BBM B/FD)"),
    (false, "H^{s+1} x H^s, s > 3/2"),
    (true, "H^s x H^s, s > 3/2"),
    (false, "H^{s+1} x H^s, s > 3/2"),
    (true, "H^s x H^s, s > 3/2"),
    (true, "H^s x H^{s+1}, s > 1/2"),
    (true, "H^s x H^{s+2}, s > 1/2"),
    (true, "H^s x H^{s+1}, s > 1/2"),
    (true, "H^s x H^{s+2}, s > 1/2"),
    (false, ""),
    (false, ""),
    (false, ""),
    (false, ""),
];

/// Match the sign pattern of (b, d, a, c) to its unique table row.
///
/// Patterns with b < 0, d < 0, a > 0, or c > 0 fall outside the linearly
/// well-posed family and are rejected.
pub fn classify_signs(a: f64, b: f64, c: f64, d: f64) -> Result<SystemClass> {
    let pattern = SignPattern {
        b: Sign::of(b),
        d: Sign::of(d),
        a: Sign::of(a),
        c: Sign::of(c),
    };
    let admissible = pattern.b != Sign::Negative
        && pattern.d != Sign::Negative
        && pattern.a != Sign::Positive
        && pattern.c != Sign::Positive;
    if !admissible {
        return Err(Error::NotWellPosed(pattern.to_string()));
    }
    let row_index = 1
        + 8 * usize::from(pattern.b == Sign::Zero)
        + 4 * usize::from(pattern.d == Sign::Zero)
        + 2 * usize::from(pattern.a == Sign::Zero)
        + usize::from(pattern.c == Sign::Zero);
    let (relevant, label) = CLASS_ROWS[row_index - 1];
    Ok(SystemClass {
        row_index,
        sign_pattern: pattern,
        relevant,
        wellposedness_label: label.to_string(),
    })
}
