use std::fmt;
use std::str::FromStr;

use crate::error::Error;

macro_rules! named_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Error> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($label => Ok($name::$variant),)+
                    other => Err(Error::Config {
                        key: stringify!($name).to_ascii_lowercase(),
                        reason: format!(
                            "unknown value `{other}` (expected one of: {})",
                            [$($label),+].join(", ")
                        ),
                    }),
                }
            }
        }
    };
}

named_enum!(
    /// Which branch of the pipeline produced an interval.
    Path {
        Standard => "standard",
        Relevant => "relevant",
        RelevantSimulated => "relevant_simulated",
    }
);

named_enum!(
    ConformalMethod {
        Full => "full",
        Split => "split",
        Jackknife => "jackknife",
    }
);

named_enum!(
    RegressorKind {
        Ols => "ols",
        Lasso => "lasso",
        Kernel => "kernel",
    }
);

named_enum!(
    Similarity {
        Percentile => "percentile",
        Cosine => "cosine",
    }
);

impl Path {
    /// Row-label suffix used in result tables (`""`, `"r"`, `"rs"`).
    pub fn suffix(self) -> &'static str {
        match self {
            Path::Standard => "",
            Path::Relevant => "r",
            Path::RelevantSimulated => "rs",
        }
    }
}

impl RegressorKind {
    /// Row-label infix used in result tables (`""`, `"l"`, `"k"`).
    pub fn suffix(self) -> &'static str {
        match self {
            RegressorKind::Ols => "",
            RegressorKind::Lasso => "l",
            RegressorKind::Kernel => "k",
        }
    }
}

impl ConformalMethod {
    /// Column heading used in result tables.
    pub fn title(self) -> &'static str {
        match self {
            ConformalMethod::Full => "Conformal",
            ConformalMethod::Split => "Split",
            ConformalMethod::Jackknife => "Jackknife",
        }
    }
}

/// A prediction interval `[lo, up]` around the point forecast, with provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionInterval {
    pub point: f64,
    pub lo: f64,
    pub up: f64,
    pub path: Path,
    pub conformal_method: ConformalMethod,
    pub regressor: RegressorKind,
    /// Set when full conformal accepted no grid point and fell back to `[point, point]`.
    pub degenerate: bool,
}

impl PredictionInterval {
    pub fn length(&self) -> f64 {
        self.up - self.lo
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lo <= y && y <= self.up
    }

    pub fn with_path(mut self, path: Path) -> Self {
        self.path = path;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for m in ConformalMethod::ALL {
            assert_eq!(m.as_str().parse::<ConformalMethod>().unwrap(), *m);
        }
        assert_eq!(" LASSO ".parse::<RegressorKind>().unwrap(), RegressorKind::Lasso);
        assert!("ridge".parse::<RegressorKind>().is_err());
    }

    #[test]
    fn closed_interval() {
        let pi = PredictionInterval {
            point: 1.0,
            lo: 0.0,
            up: 2.0,
            path: Path::Standard,
            conformal_method: ConformalMethod::Split,
            regressor: RegressorKind::Ols,
            degenerate: false,
        };
        assert!(pi.contains(0.0) && pi.contains(2.0));
        assert!(!pi.contains(2.0 + 1e-12));
        assert_eq!(pi.length(), 2.0);
    }
}
