use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::events::GaitEvents;
use super::series::format_value;
use crate::error::{Error, Result};
use crate::kinematics::{AnatomicalAngles, Laterality, JOINT_DOFS};

/// Joint-angle columns in joint-vector order.
pub const ANGLE_COLUMNS: [&str; JOINT_DOFS] = [
    "pelvis_tilt_deg",
    "pelvis_obl_deg",
    "pelvis_rot_deg",
    "hip_flex_deg",
    "hip_add_deg",
    "hip_rot_deg",
    "knee_flex_deg",
    "knee_add_deg",
    "knee_rot_deg",
    "ankle_dorsi_deg",
    "ankle_inv_deg",
    "ankle_rot_deg",
];

/// Moment column stems; the full name adds `_Nm_kg` or `_Nm`.
pub const MOMENT_STEMS: [&str; 9] = [
    "hip_flex",
    "hip_add",
    "hip_rot",
    "knee_flex",
    "knee_add",
    "knee_rot",
    "ankle_dorsi",
    "ankle_inv",
    "ankle_rot",
];

const TIME_COLUMN: &str = "time_s";
const EVENT_COLUMN: &str = "event";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    AbleBodied,
    PassiveProsthesis,
    PoweredProsthesis,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::AbleBodied => "able_bodied",
            Condition::PassiveProsthesis => "passive_prosthesis",
            Condition::PoweredProsthesis => "powered_prosthesis",
        })
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "able_bodied" | "ablebodied" | "ab" => Ok(Condition::AbleBodied),
            "passive_prosthesis" | "passiveprosthesis" | "passive" => Ok(Condition::PassiveProsthesis),
            "powered_prosthesis" | "poweredprosthesis" | "powered" => Ok(Condition::PoweredProsthesis),
            other => Err(format!("unknown condition '{other}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Leg {
    Amputated,
    Contralateral,
    Left,
    Right,
}

impl fmt::Display for Leg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Leg::Amputated => "amputated",
            Leg::Contralateral => "contralateral",
            Leg::Left => "left",
            Leg::Right => "right",
        })
    }
}

impl FromStr for Leg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "amputated" | "amp" => Ok(Leg::Amputated),
            "contralateral" | "con" => Ok(Leg::Contralateral),
            "left" | "l" => Ok(Leg::Left),
            "right" | "r" => Ok(Leg::Right),
            other => Err(format!("unknown leg '{other}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentUnits {
    #[serde(rename = "Nm_kg")]
    NmPerKg,
    #[serde(rename = "Nm")]
    Nm,
}

impl MomentUnits {
    fn suffix(self) -> &'static str {
        match self {
            MomentUnits::NmPerKg => "_Nm_kg",
            MomentUnits::Nm => "_Nm",
        }
    }
}

impl FromStr for MomentUnits {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "Nm_kg" | "Nm/kg" | "nm_kg" => Ok(MomentUnits::NmPerKg),
            "Nm" | "nm" => Ok(MomentUnits::Nm),
            other => Err(format!("unknown moment units '{other}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialMetadata {
    pub subject: String,
    pub side: Laterality,
    pub condition: Condition,
    pub leg: Leg,
    pub speed_mps: f64,
    pub mass_kg: Option<f64>,
    pub sampling_hz: f64,
}

/// One walking trial. Angles stay in degrees as loaded; moments are Nm/kg.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub id: String,
    pub metadata: TrialMetadata,
    pub time: Vec<f64>,
    pub angles_deg: Vec<[f64; JOINT_DOFS]>,
    /// Hip, knee, ankle moments in joint-vector order. `None` in
    /// kinematics-only trials.
    pub moments: Option<Vec<[f64; 9]>>,
    /// Events from the file's `event` column, if it had one.
    pub events: Option<GaitEvents>,
    /// Samples with a non-finite angle or moment.
    pub flagged: Vec<usize>,
    /// Columns ignored in lenient mode.
    pub ignored_columns: Vec<String>,
}

impl TrialRecord {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn has_moments(&self) -> bool {
        self.moments.is_some()
    }

    pub fn angles(&self) -> Vec<AnatomicalAngles> {
        self.angles_deg.iter().map(|q| AnatomicalAngles::from_degrees(*q)).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadOptions {
    /// Reject unknown columns and metadata keys; enforce `moment_units`.
    pub strict: bool,
    /// Overrides the sidecar's `side`.
    pub side: Option<Laterality>,
    /// Expected moment units; checked against the file in strict mode.
    pub moment_units: Option<MomentUnits>,
}

/// Sidecar path for a trial CSV: same stem, `.meta` extension.
pub fn metadata_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta")
}

fn schema_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn parse_metadata(path: &Path, text: &str, opts: &LoadOptions) -> Result<(TrialMetadata, BTreeMap<String, String>)> {
    let mut kv = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once(['=', ':']) else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected key = value, got '{line}'"),
            });
        };
        kv.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
    }
    const KNOWN: [&str; 9] = [
        "subject",
        "side",
        "condition",
        "leg",
        "speed_mps",
        "mass_kg",
        "sampling_hz",
        "moment_units",
        "angle_units",
    ];
    if opts.strict {
        if let Some(k) = kv.keys().find(|k| !KNOWN.contains(&k.as_str())) {
            return Err(schema_err(path, format!("unknown metadata key '{k}'")));
        }
    }
    let num = |key: &str| -> Result<Option<f64>> {
        kv.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| schema_err(path, format!("{key}: '{v}' is not a number")))
            })
            .transpose()
    };
    let side = match (opts.side, kv.get("side")) {
        (Some(s), _) => s,
        (None, Some(v)) => v.parse().map_err(|e: String| schema_err(path, e))?,
        (None, None) => return Err(schema_err(path, "missing 'side' (set it in the sidecar or pass a side override)")),
    };
    let condition = kv
        .get("condition")
        .map(|v| v.parse().map_err(|e: String| schema_err(path, e)))
        .transpose()?
        .unwrap_or(Condition::AbleBodied);
    let leg = kv
        .get("leg")
        .map(|v| v.parse().map_err(|e: String| schema_err(path, e)))
        .transpose()?
        .unwrap_or(match side {
            Laterality::Left => Leg::Left,
            Laterality::Right => Leg::Right,
        });
    let speed_mps = num("speed_mps")?.ok_or_else(|| schema_err(path, "missing 'speed_mps'"))?;
    if speed_mps.is_nan() || speed_mps <= 0.0 {
        return Err(schema_err(path, format!("speed_mps must be positive, got {speed_mps}")));
    }
    let mass_kg = num("mass_kg")?;
    if let Some(m) = mass_kg {
        if m.is_nan() || m <= 0.0 {
            return Err(schema_err(path, format!("mass_kg must be positive, got {m}")));
        }
    }
    let sampling_hz = num("sampling_hz")?.unwrap_or(0.0);
    if let Some(u) = kv.get("angle_units") {
        if !matches!(u.to_ascii_lowercase().as_str(), "deg" | "degrees") {
            return Err(Error::UnitMismatch(format!("angles must be in degrees, metadata declares '{u}'")));
        }
    }
    Ok((
        TrialMetadata {
            subject: kv.get("subject").cloned().unwrap_or_default(),
            side,
            condition,
            leg,
            speed_mps,
            mass_kg,
            sampling_hz,
        },
        kv,
    ))
}

/// Loads `path` with its `.meta` sidecar.
pub fn load_trial(path: &Path, opts: &LoadOptions) -> Result<TrialRecord> {
    let meta_path = metadata_path(path);
    let text = fs::read_to_string(&meta_path)
        .map_err(|e| schema_err(&meta_path, format!("cannot read metadata sidecar: {e}")))?;
    load_trial_with_metadata(path, &text, opts)
}

/// Loads a trial CSV with metadata supplied as sidecar text.
pub fn load_trial_with_metadata(path: &Path, metadata: &str, opts: &LoadOptions) -> Result<TrialRecord> {
    let (mut meta, kv) = parse_metadata(&metadata_path(path), metadata, opts)?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| headers.iter().position(|h| h == name);

    let time_idx = col(TIME_COLUMN).ok_or_else(|| schema_err(path, "missing column 'time_s'"))?;
    let mut angle_idx = [0usize; JOINT_DOFS];
    for (slot, name) in angle_idx.iter_mut().zip(ANGLE_COLUMNS) {
        *slot = match col(name) {
            Some(i) => i,
            None => {
                let rad = name.replace("_deg", "_rad");
                if col(&rad).is_some() {
                    return Err(Error::UnitMismatch(format!("column '{rad}': angles must be in degrees")));
                }
                return Err(schema_err(path, format!("missing column '{name}'")));
            }
        };
    }

    // moment columns: all nine in one unit, or none
    let mut moment_units = None;
    let mut moment_idx = [0usize; 9];
    for units in [MomentUnits::NmPerKg, MomentUnits::Nm] {
        let found: Vec<Option<usize>> = MOMENT_STEMS
            .iter()
            .map(|s| col(&format!("{s}{}", units.suffix())))
            .collect();
        let present = found.iter().filter(|f| f.is_some()).count();
        if present == 0 {
            continue;
        }
        if present < 9 || moment_units.is_some() {
            return Err(schema_err(path, "moment columns must be all nine hip/knee/ankle components in a single unit"));
        }
        for (slot, f) in moment_idx.iter_mut().zip(found) {
            *slot = f.unwrap();
        }
        moment_units = Some(units);
    }
    if let (Some(found), Some(declared)) = (moment_units, kv.get("moment_units")) {
        let declared: MomentUnits = declared.parse().map_err(|e: String| schema_err(path, e))?;
        if declared != found {
            return Err(Error::UnitMismatch(format!(
                "metadata declares {declared:?} but columns are {found:?}"
            )));
        }
    }
    if opts.strict {
        if let (Some(found), Some(expected)) = (moment_units, opts.moment_units) {
            if found != expected {
                return Err(Error::UnitMismatch(format!("expected {expected:?} moments, file has {found:?}")));
            }
        }
    }
    let mass_divisor = match moment_units {
        Some(MomentUnits::Nm) => Some(
            meta.mass_kg
                .ok_or_else(|| Error::UnitMismatch("moments in Nm require mass_kg in metadata".into()))?,
        ),
        _ => None,
    };

    let event_idx = col(EVENT_COLUMN);
    let mut known: Vec<usize> = vec![time_idx];
    known.extend(angle_idx);
    if moment_units.is_some() {
        known.extend(moment_idx);
    }
    known.extend(event_idx);
    let ignored_columns: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| !known.contains(i))
        .map(|(_, h)| h.clone())
        .collect();
    if opts.strict && !ignored_columns.is_empty() {
        return Err(schema_err(path, format!("unknown columns: {}", ignored_columns.join(", "))));
    }

    let mut time = Vec::new();
    let mut angles_deg = Vec::new();
    let mut moments = Vec::new();
    let mut flagged = Vec::new();
    let mut heel_strikes = Vec::new();
    let mut toe_offs = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = row + 2;
        let value = |i: usize| -> Result<f64> {
            let s = record.get(i).unwrap_or("");
            if s.is_empty() || s.eq_ignore_ascii_case("nan") {
                return Ok(f64::NAN);
            }
            s.parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("column '{}': '{s}' is not a number", headers[i]),
            })
        };
        let t = value(time_idx)?;
        if !t.is_finite() || time.last().is_some_and(|&prev| t <= prev) {
            return Err(Error::NonMonotonicTime(line));
        }
        time.push(t);
        let mut q = [0.0; JOINT_DOFS];
        for (v, &i) in q.iter_mut().zip(&angle_idx) {
            *v = value(i)?;
        }
        let mut bad = q.iter().any(|v| !v.is_finite());
        angles_deg.push(q);
        if moment_units.is_some() {
            let mut m = [0.0; 9];
            for (v, &i) in m.iter_mut().zip(&moment_idx) {
                *v = value(i)? / mass_divisor.unwrap_or(1.0);
            }
            bad |= m.iter().any(|v| !v.is_finite());
            moments.push(m);
        }
        if bad {
            flagged.push(row);
        }
        if let Some(i) = event_idx {
            match record.get(i).unwrap_or("").to_ascii_uppercase().as_str() {
                "" => {}
                "HS" => heel_strikes.push(row),
                "TO" => toe_offs.push(row),
                other => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line,
                        message: format!("event '{other}' (expected HS or TO)"),
                    })
                }
            }
        }
    }
    if time.len() < 2 {
        return Err(schema_err(path, "trial needs at least two samples"));
    }
    if meta.sampling_hz.is_nan() || meta.sampling_hz <= 0.0 {
        let mut dts: Vec<f64> = time.windows(2).map(|w| w[1] - w[0]).collect();
        dts.sort_by(f64::total_cmp);
        meta.sampling_hz = 1.0 / dts[dts.len() / 2];
    }
    let events = if heel_strikes.is_empty() && toe_offs.is_empty() {
        None
    } else {
        let ev = GaitEvents {
            heel_strikes,
            toe_offs,
        };
        ev.validate()?;
        Some(ev)
    };
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(TrialRecord {
        id,
        metadata: meta,
        time,
        angles_deg,
        moments: moment_units.map(|_| moments),
        events,
        flagged,
        ignored_columns,
    })
}

/// Writes `dir/<id>.csv` and `dir/<id>.meta`. Moments are written in Nm/kg.
pub fn write_trial(dir: &Path, trial: &TrialRecord) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{}.csv", trial.id));
    let mut out = String::new();
    let mut header: Vec<String> = vec![TIME_COLUMN.into()];
    header.extend(ANGLE_COLUMNS.iter().map(|s| s.to_string()));
    if trial.moments.is_some() {
        header.extend(MOMENT_STEMS.iter().map(|s| format!("{s}_Nm_kg")));
    }
    if trial.events.is_some() {
        header.push(EVENT_COLUMN.into());
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for k in 0..trial.len() {
        let mut row: Vec<String> = vec![format_value(trial.time[k])];
        row.extend(trial.angles_deg[k].iter().map(|v| format_value(*v)));
        if let Some(m) = &trial.moments {
            row.extend(m[k].iter().map(|v| format_value(*v)));
        }
        if let Some(ev) = &trial.events {
            row.push(
                if ev.heel_strikes.binary_search(&k).is_ok() {
                    "HS"
                } else if ev.toe_offs.binary_search(&k).is_ok() {
                    "TO"
                } else {
                    ""
                }
                .into(),
            );
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(&csv_path, out)?;

    let m = &trial.metadata;
    let mut meta = fs::File::create(metadata_path(&csv_path))?;
    writeln!(meta, "subject = {}", m.subject)?;
    writeln!(meta, "side = {}", m.side)?;
    writeln!(meta, "condition = {}", m.condition)?;
    writeln!(meta, "leg = {}", m.leg)?;
    writeln!(meta, "speed_mps = {}", m.speed_mps)?;
    if let Some(mass) = m.mass_kg {
        writeln!(meta, "mass_kg = {mass}")?;
    }
    writeln!(meta, "sampling_hz = {}", m.sampling_hz)?;
    if trial.moments.is_some() {
        writeln!(meta, "moment_units = Nm_kg")?;
    }
    Ok(csv_path)
}
