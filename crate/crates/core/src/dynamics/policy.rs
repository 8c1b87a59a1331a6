//! Gauge policies: the free part of the multiplier dynamics.

use std::fmt;
use std::str::FromStr;

use crate::dynamics::MultiplierRates;
use crate::error::Error;
use crate::framework::PhasePoint;

/// Chooses the self-stress coefficients of the tension rates at a given time
/// and state. Must return exactly `rates.gauge_dimension()` values.
pub trait GaugePolicy: Send + Sync {
    fn coefficients(&self, time: f64, point: &PhasePoint, rates: &MultiplierRates) -> Vec<f64>;

    fn describe(&self) -> String {
        "custom".to_string()
    }
}

impl<P: GaugePolicy + ?Sized> GaugePolicy for Box<P> {
    fn coefficients(&self, time: f64, point: &PhasePoint, rates: &MultiplierRates) -> Vec<f64> {
        (**self).coefficients(time, point, rates)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

/// Time-only policies from the command-line mini-language. The scalar value is
/// applied to every self-stress coefficient.
///
/// Accepted forms: `0`, a number, `const:<c>`, `cos:<a>,<w>` (a cos wt),
/// `sin:<a>,<w>`, and bare `cos` / `sin` for unit amplitude and frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyShape {
    Const(f64),
    Cos { amplitude: f64, frequency: f64 },
    Sin { amplitude: f64, frequency: f64 },
}

impl PolicyShape {
    pub const ZERO: PolicyShape = PolicyShape::Const(0.0);

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            PolicyShape::Const(c) => c,
            PolicyShape::Cos {
                amplitude,
                frequency,
            } => amplitude * (frequency * t).cos(),
            PolicyShape::Sin {
                amplitude,
                frequency,
            } => amplitude * (frequency * t).sin(),
        }
    }
}

impl GaugePolicy for PolicyShape {
    fn coefficients(&self, time: f64, _point: &PhasePoint, rates: &MultiplierRates) -> Vec<f64> {
        vec![self.value(time); rates.gauge_dimension()]
    }

    fn describe(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for PolicyShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyShape::Const(c) => write!(f, "const:{c}"),
            PolicyShape::Cos {
                amplitude,
                frequency,
            } => write!(f, "cos:{amplitude},{frequency}"),
            PolicyShape::Sin {
                amplitude,
                frequency,
            } => write!(f, "sin:{amplitude},{frequency}"),
        }
    }
}

impl FromStr for PolicyShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::InvalidPolicy(s.to_string());
        let number = |x: &str| -> Result<f64, Error> {
            let v: f64 = x.trim().parse().map_err(|_| bad())?;
            v.is_finite().then_some(v).ok_or_else(bad)
        };
        let pair = |args: &str| -> Result<(f64, f64), Error> {
            let (a, w) = args.split_once(',').ok_or_else(bad)?;
            Ok((number(a)?, number(w)?))
        };
        let s = s.trim();
        match s.split_once(':') {
            None => match s {
                "cos" => Ok(PolicyShape::Cos {
                    amplitude: 1.0,
                    frequency: 1.0,
                }),
                "sin" => Ok(PolicyShape::Sin {
                    amplitude: 1.0,
                    frequency: 1.0,
                }),
                _ => Ok(PolicyShape::Const(number(s)?)),
            },
            Some(("const", c)) => Ok(PolicyShape::Const(number(c)?)),
            Some(("cos", args)) => {
                let (amplitude, frequency) = pair(args)?;
                Ok(PolicyShape::Cos {
                    amplitude,
                    frequency,
                })
            }
            Some(("sin", args)) => {
                let (amplitude, frequency) = pair(args)?;
                Ok(PolicyShape::Sin {
                    amplitude,
                    frequency,
                })
            }
            Some(_) => Err(bad()),
        }
    }
}

/// Wraps a scalar function of time, broadcast to every coefficient.
pub struct FnPolicy<F> {
    name: String,
    f: F,
}

impl<F> FnPolicy<F>
where
    F: Fn(f64) -> f64 + Send + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        Self {
            name: name.into(),
            f,
        }
    }
}

impl<F> GaugePolicy for FnPolicy<F>
where
    F: Fn(f64) -> f64 + Send + Sync,
{
    fn coefficients(&self, time: f64, _point: &PhasePoint, rates: &MultiplierRates) -> Vec<f64> {
        vec![(self.f)(time); rates.gauge_dimension()]
    }

    fn describe(&self) -> String {
        self.name.clone()
    }
}
