//! Run configuration stored as flat `key=value` text.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::grids::{BallGridSpec, SphereGrid};
use crate::report::KeyValues;
use crate::synthesis::DEFAULT_DENOMINATOR_THRESHOLD;

/// Resolved parameters of a run.
///
/// Recognized keys: `k`, `alpha` (three comma-separated reals, normalized on
/// load), `epsilon`, `L_max`, `sphere_order`, `radial_count`, `angular_order`
/// (ball grid; defaults to `sphere_order`), `denom_threshold` and `seed`.
/// Blank lines and lines starting with `#` are ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub k: f64,
    pub alpha: Vec3,
    pub epsilon: f64,
    pub l_max: usize,
    pub sphere_order: usize,
    pub radial_count: usize,
    pub angular_order: usize,
    pub denom_threshold: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            k: 1.0,
            alpha: Vec3::new(0.0, 0.0, 1.0),
            epsilon: 1e-2,
            l_max: 8,
            sphere_order: 16,
            radial_count: 24,
            angular_order: 16,
            denom_threshold: DEFAULT_DENOMINATOR_THRESHOLD,
            seed: 0,
        }
    }
}

fn value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid value for {key}: {raw:?}")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut angular_given = false;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, val) = trimmed
                .split_once('=')
                .ok_or_else(|| Error::parse(line, format!("expected key=value, got {trimmed:?}")))?;
            let key = key.trim();
            match key {
                "k" => cfg.k = value(line, key, val)?,
                "alpha" => {
                    let parts = val
                        .split(',')
                        .map(|p| value::<f64>(line, key, p))
                        .collect::<Result<Vec<_>>>()?;
                    if parts.len() != 3 {
                        return Err(Error::parse(line, "alpha needs three components"));
                    }
                    let raw = Vec3::new(parts[0], parts[1], parts[2]);
                    // Leave already-unit input untouched so echoed configs re-parse identically.
                    cfg.alpha = if (raw.norm() - 1.0).abs() <= 4.0 * f64::EPSILON {
                        raw
                    } else {
                        raw.normalized()
                            .ok_or_else(|| Error::parse(line, "alpha must be nonzero"))?
                    };
                }
                "epsilon" => cfg.epsilon = value(line, key, val)?,
                "L_max" => cfg.l_max = value(line, key, val)?,
                "sphere_order" => cfg.sphere_order = value(line, key, val)?,
                "radial_count" => cfg.radial_count = value(line, key, val)?,
                "angular_order" => {
                    cfg.angular_order = value(line, key, val)?;
                    angular_given = true;
                }
                "denom_threshold" => cfg.denom_threshold = value(line, key, val)?,
                "seed" => cfg.seed = value(line, key, val)?,
                other => return Err(Error::parse(line, format!("unknown key {other:?}"))),
            }
        }
        if !angular_given {
            cfg.angular_order = cfg.sphere_order;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.k > 0.0 && self.k.is_finite()) {
            return bad(format!("k must be positive, got {}", self.k));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if (self.alpha.norm() - 1.0).abs() > 1e-12 {
            return bad("alpha must be a unit vector".into());
        }
        if !(self.denom_threshold > 0.0 && self.denom_threshold < 1.0) {
            return bad(format!(
                "denom_threshold must lie in (0, 1), got {}",
                self.denom_threshold
            ));
        }
        if self.radial_count == 0 {
            return bad("radial_count must be at least 1".into());
        }
        Ok(())
    }

    pub fn sphere_grid(&self) -> Result<SphereGrid> {
        SphereGrid::new(self.sphere_order)
    }

    /// Ball grid on the unit ball.
    pub fn ball_spec(&self) -> BallGridSpec {
        BallGridSpec::new(self.radial_count, self.angular_order, 1.0)
    }

    pub fn key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.push_f64("k", self.k);
        kv.push(
            "alpha",
            format!(
                "{:e},{:e},{:e}",
                self.alpha.x, self.alpha.y, self.alpha.z
            ),
        );
        kv.push_f64("epsilon", self.epsilon);
        kv.push("L_max", self.l_max);
        kv.push("sphere_order", self.sphere_order);
        kv.push("radial_count", self.radial_count);
        kv.push("angular_order", self.angular_order);
        kv.push_f64("denom_threshold", self.denom_threshold);
        kv.push("seed", self.seed);
        kv
    }

    /// Text that [`RunConfig::parse`] reads back to the same value.
    pub fn to_text(&self) -> String {
        self.key_values().to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
        assert_eq!(RunConfig::parse("# nothing\n\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn parses_and_normalizes() {
        let cfg = RunConfig::parse("k=2.5\nalpha = 0, 3, 4\nL_max=5\nsphere_order=10\n").unwrap();
        assert_eq!(cfg.k, 2.5);
        assert!(cfg.alpha.distance(Vec3::new(0.0, 0.6, 0.8)) < 1e-15);
        assert_eq!(cfg.l_max, 5);
        assert_eq!(cfg.angular_order, 10);
    }

    #[test]
    fn echo_round_trips() {
        let cfg = RunConfig::parse("k=3\nalpha=1,1,0\nangular_order=6\nseed=17\nepsilon=0.001\n").unwrap();
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("k=1\nbogus=2\n", 2),
            ("\n\nk=abc\n", 3),
            ("alpha=1,2\n", 1),
            ("alpha=0,0,0\n", 1),
            ("k 1\n", 1),
        ];
        for (text, line) in cases {
            match RunConfig::parse(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn invalid_values_rejected() {
        for text in ["k=0", "k=-1", "epsilon=0", "denom_threshold=1", "denom_threshold=0", "radial_count=0"] {
            assert!(RunConfig::parse(text).is_err(), "{text}");
        }
    }
}
