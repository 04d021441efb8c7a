//! Run configuration: a TOML document with the sections `[system]`,
//! `[experiment]`, `[grid]` and `[output]`, plus `--set section.key=value`
//! overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use toml::{Spanned, Value};
use waveqed::SystemParams;

/// Keys accepted in each section.
pub const SCHEMA: [(&str, &[&str]); 4] = [
    (
        "system",
        &["preset", "omega", "gamma_r", "omega1", "omega2", "gamma1", "gamma2", "separation", "phase"],
    ),
    ("experiment", &["kind", "energy", "delta", "channels", "output_channels", "mode"]),
    ("grid", &["start", "stop", "points"]),
    ("output", &["path"]),
];

const PRESET_KEYS: [&str; 6] = ["omega1", "omega2", "gamma1", "gamma2", "separation", "phase"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Override,
    Document,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Override => write!(f, "--set"),
            Origin::Document => write!(f, "document"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{origin}: malformed document: {message}")]
    Syntax { origin: Origin, message: String },
    #[error("{path} ({origin}): unknown key")]
    UnknownKey { path: String, origin: Origin },
    #[error("{path}: missing required key{}", context.as_ref().map(|c| format!(" ({c})")).unwrap_or_default())]
    Missing { path: String, context: Option<String> },
    #[error("{path} ({origin}): expected {expected}")]
    Type {
        path: String,
        origin: Origin,
        expected: &'static str,
    },
    #[error("{path} ({origin}): value {value} out of range: {reason}")]
    Range {
        path: String,
        origin: Origin,
        value: String,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    S1,
    Roots,
    Density,
    G2,
    Ratio,
    Verify,
}

impl Experiment {
    const NAMES: [(&'static str, Experiment); 6] = [
        ("s1", Experiment::S1),
        ("roots", Experiment::Roots),
        ("density", Experiment::Density),
        ("g2", Experiment::G2),
        ("ratio", Experiment::Ratio),
        ("verify", Experiment::Verify),
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeChoice {
    Exact,
    Markov,
    Both,
}

/// Uniform grid over the experiment's swept variable: `k` for `s1`, `E` for
/// `roots`, `Δ'` for `density`, `τ` for `g2` and `ratio`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: SystemParams,
    pub experiment: Experiment,
    pub energy: f64,
    pub delta: f64,
    pub channels: (usize, usize),
    pub output_channels: (usize, usize),
    pub mode: ModeChoice,
    pub grid: Option<GridSpec>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: Value,
    origin: Origin,
}

/// Flattened `section.key` entries with the place each one came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document {
    entries: BTreeMap<(String, String), Entry>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn known(section: &str, key: &str) -> bool {
    SCHEMA.iter().any(|(s, keys)| *s == section && keys.contains(&key))
}

impl Document {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let locate = |e: toml::de::Error| ConfigError::Syntax {
            origin: e.span().map_or(Origin::Document, |s| Origin::Line(line_of(text, s.start))),
            message: e.message().trim().to_string(),
        };
        let top: BTreeMap<String, Spanned<Value>> = toml::from_str(text).map_err(locate)?;
        for (name, v) in &top {
            if !v.get_ref().is_table() || !SCHEMA.iter().any(|(s, _)| s == name) {
                return Err(ConfigError::UnknownKey {
                    path: name.clone(),
                    origin: Origin::Line(line_of(text, v.span().start)),
                });
            }
        }
        let nested: BTreeMap<String, BTreeMap<String, Spanned<Value>>> = toml::from_str(text).map_err(locate)?;
        let mut doc = Document::default();
        for (section, keys) in nested {
            for (key, v) in keys {
                let origin = Origin::Line(line_of(text, v.span().start));
                if !known(&section, &key) {
                    return Err(ConfigError::UnknownKey {
                        path: format!("{section}.{key}"),
                        origin,
                    });
                }
                doc.entries.insert(
                    (section.clone(), key),
                    Entry {
                        value: v.into_inner(),
                        origin,
                    },
                );
            }
        }
        Ok(doc)
    }

    /// Applies `section.key=value`. The value is read as a TOML value and
    /// falls back to a bare string.
    pub fn set(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let bad = |message: &str| ConfigError::Syntax {
            origin: Origin::Override,
            message: format!("{message} in `{assignment}`"),
        };
        let (path, raw) = assignment.split_once('=').ok_or_else(|| bad("expected section.key=value"))?;
        let (section, key) = path.trim().split_once('.').ok_or_else(|| bad("expected section.key"))?;
        if !known(section, key) {
            return Err(ConfigError::UnknownKey {
                path: path.trim().to_string(),
                origin: Origin::Override,
            });
        }
        let raw = raw.trim();
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(raw.to_string()));
        self.entries.insert(
            (section.to_string(), key.to_string()),
            Entry {
                value,
                origin: Origin::Override,
            },
        );
        Ok(())
    }

    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries.get(&(section.to_string(), key.to_string()))
    }

    fn origin(&self, section: &str, key: &str) -> Origin {
        self.get(section, key).map_or(Origin::Document, |e| e.origin)
    }

    fn float(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        let Some(e) = self.get(section, key) else {
            return Ok(None);
        };
        let v = match e.value {
            Value::Float(x) => x,
            Value::Integer(i) => i as f64,
            _ => {
                return Err(ConfigError::Type {
                    path: format!("{section}.{key}"),
                    origin: e.origin,
                    expected: "a number",
                })
            }
        };
        if !v.is_finite() {
            return Err(range(section, key, e.origin, v, "must be finite"));
        }
        Ok(Some(v))
    }

    fn string(&self, section: &str, key: &str) -> Result<Option<&str>, ConfigError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(Entry {
                value: Value::String(s), ..
            }) => Ok(Some(s)),
            Some(e) => Err(ConfigError::Type {
                path: format!("{section}.{key}"),
                origin: e.origin,
                expected: "a string",
            }),
        }
    }

    fn choice<T: Copy>(&self, section: &str, key: &str, options: &[(&str, T)]) -> Result<Option<T>, ConfigError> {
        let Some(s) = self.string(section, key)? else {
            return Ok(None);
        };
        options.iter().find(|(n, _)| n.eq_ignore_ascii_case(s)).map(|(_, v)| Some(*v)).ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            range(section, key, self.origin(section, key), format!("\"{s}\""), format!("expected one of {}", names.join(", ")))
        })
    }

    fn required(&self, section: &str, key: &str, context: Option<&str>) -> Result<f64, ConfigError> {
        self.float(section, key)?.ok_or_else(|| ConfigError::Missing {
            path: format!("{section}.{key}"),
            context: context.map(str::to_string),
        })
    }

    fn nonnegative(&self, section: &str, key: &str, v: f64) -> Result<f64, ConfigError> {
        if v < 0.0 {
            return Err(range(section, key, self.origin(section, key), v, "must be >= 0"));
        }
        Ok(v)
    }

    fn system(&self) -> Result<SystemParams, ConfigError> {
        let s = "system";
        match self.choice(s, "preset", &[("transparency", ())])? {
            Some(()) => {
                let ctx = Some("transparency preset");
                for key in PRESET_KEYS {
                    if let Some(e) = self.get(s, key) {
                        return Err(range(s, key, e.origin, "set", "conflicts with system.preset"));
                    }
                }
                let omega = self.required(s, "omega", ctx)?;
                if omega <= 0.0 {
                    return Err(range(s, "omega", self.origin(s, "omega"), omega, "must be > 0"));
                }
                let gr = self.required(s, "gamma_r", ctx)?;
                self.nonnegative(s, "gamma_r", gr)?;
                Ok(SystemParams::transparency(omega, gr))
            }
            None => {
                for key in ["omega", "gamma_r"] {
                    if let Some(e) = self.get(s, key) {
                        return Err(range(s, key, e.origin, "set", "only valid with system.preset"));
                    }
                }
                let o1 = self.required(s, "omega1", None)?;
                let o2 = self.required(s, "omega2", None)?;
                let g1 = self.required(s, "gamma1", None)?;
                let g1 = self.nonnegative(s, "gamma1", g1)?;
                let g2 = self.required(s, "gamma2", None)?;
                let g2 = self.nonnegative(s, "gamma2", g2)?;
                let sep = self.float(s, "separation")?.unwrap_or(0.0);
                let sep = self.nonnegative(s, "separation", sep)?;
                let phase = self.float(s, "phase")?.unwrap_or(0.0);
                SystemParams::new(o1, o2, g1, g2, sep, phase).map_err(|e| ConfigError::Range {
                    path: s.to_string(),
                    origin: Origin::Document,
                    value: String::new(),
                    reason: e.to_string(),
                })
            }
        }
    }

    fn channels(&self, key: &str, default: (usize, usize)) -> Result<(usize, usize), ConfigError> {
        const PAIRS: [(&str, (usize, usize)); 4] = [("RR", (0, 0)), ("RL", (0, 1)), ("LR", (1, 0)), ("LL", (1, 1))];
        Ok(self.choice("experiment", key, &PAIRS)?.unwrap_or(default))
    }

    fn grid(&self) -> Result<Option<GridSpec>, ConfigError> {
        let g = "grid";
        let (start, stop) = (self.float(g, "start")?, self.float(g, "stop")?);
        let points = match self.get(g, "points") {
            None => None,
            Some(Entry {
                value: Value::Integer(n), ..
            }) if *n >= 1 => Some(*n as usize),
            Some(Entry {
                value: Value::Integer(n),
                origin,
            }) => return Err(range(g, "points", *origin, n, "must be >= 1")),
            Some(e) => {
                return Err(ConfigError::Type {
                    path: "grid.points".into(),
                    origin: e.origin,
                    expected: "an integer",
                })
            }
        };
        match (start, stop, points) {
            (None, None, None) => Ok(None),
            (Some(start), stop, points) => {
                let points = points.unwrap_or(if stop.is_some() { 101 } else { 1 });
                let stop = match stop {
                    Some(v) => v,
                    None if points == 1 => start,
                    None => {
                        return Err(ConfigError::Missing {
                            path: "grid.stop".into(),
                            context: Some("grid.points > 1".into()),
                        })
                    }
                };
                let valid = if points == 1 { stop == start } else { stop > start };
                if !valid {
                    let reason = if points == 1 { "must equal grid.start for one point" } else { "must exceed grid.start" };
                    return Err(range(g, "stop", self.origin(g, "stop"), stop, reason));
                }
                Ok(Some(GridSpec { start, stop, points }))
            }
            (None, ..) => Err(ConfigError::Missing {
                path: "grid.start".into(),
                context: Some("grid.stop or grid.points given".into()),
            }),
        }
    }

    pub fn into_config(self) -> Result<RunConfig, ConfigError> {
        let params = self.system()?;
        let experiment = self.choice("experiment", "kind", &Experiment::NAMES)?.ok_or(ConfigError::Missing {
            path: "experiment.kind".into(),
            context: None,
        })?;
        let mode = self
            .choice(
                "experiment",
                "mode",
                &[("exact", ModeChoice::Exact), ("markov", ModeChoice::Markov), ("both", ModeChoice::Both)],
            )?
            .unwrap_or(ModeChoice::Exact);
        let grid = self.grid()?;
        if let (Some(g), Experiment::G2 | Experiment::Ratio) = (grid, experiment) {
            if g.start < 0.0 {
                return Err(range("grid", "start", self.origin("grid", "start"), g.start, "tau must be >= 0"));
            }
        }
        Ok(RunConfig {
            params,
            experiment,
            energy: self.float("experiment", "energy")?.unwrap_or(0.0),
            delta: self.float("experiment", "delta")?.unwrap_or(0.0),
            channels: self.channels("channels", (1, 0))?,
            output_channels: self.channels("output_channels", (1, 0))?,
            mode,
            grid,
            output: self.string("output", "path")?.map(PathBuf::from),
        })
    }
}

fn range(section: &str, key: &str, origin: Origin, value: impl fmt::Display, reason: impl Into<String>) -> ConfigError {
    ConfigError::Range {
        path: format!("{section}.{key}"),
        origin,
        value: value.to_string(),
        reason: reason.into(),
    }
}

/// Parses a document and applies `overrides` in order.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut doc = Document::parse(text)?;
    for o in overrides {
        doc.set(o)?;
    }
    doc.into_config()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        parse_config(text, &[])
    }

    const MINIMAL: &str = "[system]\nomega1 = 1.0\nomega2 = -1.0\ngamma1 = 0.5\ngamma2 = 0.5\n\n[experiment]\nkind = \"s1\"\n";

    #[test]
    fn minimal_document_fills_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.experiment, Experiment::S1);
        assert_eq!((c.energy, c.delta), (0.0, 0.0));
        assert_eq!(c.mode, ModeChoice::Exact);
        assert_eq!(c.channels, (1, 0));
        assert_eq!((c.params.separation, c.params.phase), (0.0, 0.0));
        assert!(c.grid.is_none() && c.output.is_none());
    }

    #[test]
    fn transparency_preset_expands() {
        let c = parse("[system]\npreset = \"transparency\"\nomega = 2.0\ngamma_r = 10\n[experiment]\nkind = \"g2\"\n").unwrap();
        assert_eq!(c.params, SystemParams::transparency(2.0, 10.0));
        assert_eq!((c.params.omega1, c.params.omega2, c.params.gamma1, c.params.phase), (2.0, -2.0, 1.0, 0.0));
    }

    #[test]
    fn negative_rate_names_key_and_line() {
        let err = parse(&MINIMAL.replace("gamma1 = 0.5", "gamma1 = -1")).unwrap_err();
        assert!(matches!(&err, ConfigError::Range { path, origin: Origin::Line(4), .. } if path == "system.gamma1"), "{err}");
        assert!(err.to_string().starts_with("system.gamma1 (line 4)"));
    }

    #[test]
    fn unknown_and_missing_keys() {
        let err = parse(&format!("{MINIMAL}colour = 3\n")).unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                path: "experiment.colour".into(),
                origin: Origin::Line(9)
            }
        );
        let err = parse(&format!("{MINIMAL}[plot]\nx = 1\n")).unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { ref path, .. } if path == "plot"));
        let err = parse(&MINIMAL.replace("omega2 = -1.0\n", "")).unwrap_err();
        assert!(matches!(err, ConfigError::Missing { ref path, .. } if path == "system.omega2"));
        let err = parse(&MINIMAL.replace("kind = \"s1\"", "kind = \"plot\"")).unwrap_err();
        assert!(err.to_string().contains("experiment.kind (line 8)"), "{err}");
    }

    #[test]
    fn type_and_syntax_errors_carry_lines() {
        let err = parse(&MINIMAL.replace("gamma2 = 0.5", "gamma2 = \"wide\"")).unwrap_err();
        assert!(matches!(err, ConfigError::Type { origin: Origin::Line(5), .. }), "{err}");
        let err = parse("[system]\nomega1 = = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { origin: Origin::Line(2), .. }), "{err}");
    }

    #[test]
    fn preset_conflicts_are_rejected() {
        let err = parse("[system]\npreset = \"transparency\"\nomega = 2.0\ngamma_r = 1\nphase = 0.3\n[experiment]\nkind = \"s1\"\n")
            .unwrap_err();
        assert!(err.to_string().starts_with("system.phase (line 5)"), "{err}");
    }

    #[test]
    fn overrides_replace_and_add() {
        let sets = ["experiment.kind=g2", "system.gamma1 = 0.25", "grid.start=0", "grid.stop=3", "grid.points=4"].map(String::from);
        let c = parse_config(MINIMAL, &sets).unwrap();
        assert_eq!(c.experiment, Experiment::G2);
        assert_eq!(c.params.gamma1, 0.25);
        assert_eq!(c.grid, Some(GridSpec { start: 0.0, stop: 3.0, points: 4 }));
        let err = parse_config(MINIMAL, &["system.gamma2=-2".into()]).unwrap_err();
        assert!(err.to_string().starts_with("system.gamma2 (--set)"), "{err}");
        assert!(matches!(parse_config(MINIMAL, &["nokey".into()]), Err(ConfigError::Syntax { .. })));
        assert!(matches!(parse_config(MINIMAL, &["grid.step=1".into()]), Err(ConfigError::UnknownKey { .. })));
    }

    #[test]
    fn grid_validation() {
        let with = |g: &str| parse(&format!("{MINIMAL}[grid]\n{g}\n"));
        assert_eq!(with("start = 0.5").unwrap().grid, Some(GridSpec { start: 0.5, stop: 0.5, points: 1 }));
        assert!(matches!(with("start = 1\nstop = 0"), Err(ConfigError::Range { .. })));
        assert!(matches!(with("stop = 1"), Err(ConfigError::Missing { .. })));
        assert!(matches!(with("start = 0\npoints = 0"), Err(ConfigError::Range { .. })));
        assert!(matches!(with("start = 0\npoints = 5"), Err(ConfigError::Missing { .. })));
    }
}
