use serde::{Deserialize, Serialize};

use crate::cvec::{CPoint, C64};

/// Anything evaluable as a symbol at `w` with boundary distance `delta`.
pub trait SymbolEval: Sync {
    fn eval(&self, w: &CPoint, delta: f64) -> C64;
}

impl<F: Fn(&CPoint, f64) -> C64 + Sync> SymbolEval for F {
    fn eval(&self, w: &CPoint, delta: f64) -> C64 {
        self(w, delta)
    }
}

/// Registered symbol family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "symbol", rename_all = "snake_case", deny_unknown_fields)]
pub enum Symbol {
    Constant { value: f64 },
    /// `|w_1|^2`.
    BoundedSmooth,
    /// `(1 - |w|^2 / R^2)^3` inside `|w| < R`, zero outside.
    CompactSupport { radius: f64 },
    /// `log delta(w)`.
    LogDelta,
    /// `max(delta, floor)^{-alpha}`.
    DeltaPower { alpha: f64, floor: f64 },
    /// `cos(log delta(w))`.
    Oscillating,
    /// `conj(w_1)`.
    ConjHolomorphic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolClass {
    BoundedSmooth,
    CompactSupport,
    LogDelta,
    DeltaPower,
    Oscillating,
    ConjHolomorphic,
}

/// Expected membership; `None` where it is recorded rather than asserted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Expected {
    pub bmo: Option<bool>,
    pub vmo: Option<bool>,
}

impl Symbol {
    pub fn id(&self) -> String {
        match self {
            Symbol::Constant { value } => format!("constant({value})"),
            Symbol::BoundedSmooth => "bounded_smooth".into(),
            Symbol::CompactSupport { radius } => format!("compact_support({radius})"),
            Symbol::LogDelta => "log_delta".into(),
            Symbol::DeltaPower { alpha, floor } => format!("delta_power({alpha},{floor:e})"),
            Symbol::Oscillating => "oscillating".into(),
            Symbol::ConjHolomorphic => "conj_holomorphic".into(),
        }
    }

    pub fn class(&self) -> SymbolClass {
        match self {
            Symbol::Constant { .. } | Symbol::BoundedSmooth => SymbolClass::BoundedSmooth,
            Symbol::CompactSupport { .. } => SymbolClass::CompactSupport,
            Symbol::LogDelta => SymbolClass::LogDelta,
            Symbol::DeltaPower { .. } => SymbolClass::DeltaPower,
            Symbol::Oscillating => SymbolClass::Oscillating,
            Symbol::ConjHolomorphic => SymbolClass::ConjHolomorphic,
        }
    }

    pub fn expected(&self) -> Expected {
        match self.class() {
            SymbolClass::BoundedSmooth | SymbolClass::CompactSupport => Expected { bmo: Some(true), vmo: Some(true) },
            SymbolClass::LogDelta | SymbolClass::Oscillating => Expected { bmo: Some(true), vmo: Some(false) },
            SymbolClass::DeltaPower => Expected { bmo: Some(false), vmo: Some(false) },
            SymbolClass::ConjHolomorphic => Expected { bmo: Some(true), vmo: None },
        }
    }

    /// The BMO members used for equivalence fits.
    pub fn bmo_family() -> Vec<Symbol> {
        vec![
            Symbol::BoundedSmooth,
            Symbol::CompactSupport { radius: 0.5 },
            Symbol::LogDelta,
            Symbol::Oscillating,
            Symbol::ConjHolomorphic,
        ]
    }
}

impl SymbolEval for Symbol {
    fn eval(&self, w: &CPoint, delta: f64) -> C64 {
        let re = |x: f64| C64::new(x, 0.0);
        match self {
            Symbol::Constant { value } => re(*value),
            Symbol::BoundedSmooth => re(w[0].norm_sqr()),
            Symbol::CompactSupport { radius } => {
                let t = w.norm_sqr() / (radius * radius);
                re(if t < 1.0 { (1.0 - t).powi(3) } else { 0.0 })
            }
            Symbol::LogDelta => re(delta.ln()),
            Symbol::DeltaPower { alpha, floor } => re(delta.max(*floor).powf(-alpha)),
            Symbol::Oscillating => re(delta.ln().cos()),
            Symbol::ConjHolomorphic => w[0].conj(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_at_known_points() {
        let w = CPoint::from_real(&[0.5, 0.0]);
        assert_eq!(Symbol::BoundedSmooth.eval(&w, 0.5), C64::new(0.25, 0.0));
        assert_eq!(Symbol::CompactSupport { radius: 0.5 }.eval(&w, 0.5), C64::new(0.0, 0.0));
        assert_eq!(Symbol::CompactSupport { radius: 1.0 }.eval(&w, 0.5), C64::new(0.421875, 0.0));
        assert_eq!(Symbol::LogDelta.eval(&w, 1.0), C64::new(0.0, 0.0));
        assert_eq!(Symbol::DeltaPower { alpha: 0.5, floor: 0.01 }.eval(&w, 1e-6), C64::new(10.0, 0.0));
        let v = CPoint::new(&[C64::new(0.3, 0.4)]);
        assert_eq!(Symbol::ConjHolomorphic.eval(&v, 0.5), C64::new(0.3, -0.4));
    }

    #[test]
    fn config_names_round_trip() {
        let s: Symbol = serde_json::from_str(r#"{"symbol":"delta_power","alpha":0.3,"floor":0.001}"#).unwrap();
        assert_eq!(s, Symbol::DeltaPower { alpha: 0.3, floor: 0.001 });
        assert!(serde_json::from_str::<Symbol>(r#"{"symbol":"compact_support","radius":0.5,"extra":1}"#).is_err());
    }
}
