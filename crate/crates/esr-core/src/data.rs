//! Dataset model: recordings, manifests, windowing, and fold planning.
//!
//! On-disk formats (both UTF-8 text):
//!
//! - **Manifest**: optional `# note: <text>` first line, then the header
//!   `id,path,lead,fs,label`, then one comma-separated entry per line.
//!   Paths are relative to the manifest's directory.
//! - **Recording**: header `fs=<Hz> lead=<lead> n=<count>`, then one decimal
//!   amplitude (millivolts) per line. The recording's id and label live in
//!   the manifest, not the file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::Lcg64;

// ── Leads and labels ─────────────────────────────────────────────────────────

/// One of the 12 standard ECG leads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LeadId {
    I,
    II,
    III,
    AVR,
    AVL,
    AVF,
    V1,
    V2,
    V3,
    V4,
    V5,
    V6,
}

impl LeadId {
    pub const ALL: [LeadId; 12] = [
        LeadId::I,
        LeadId::II,
        LeadId::III,
        LeadId::AVR,
        LeadId::AVL,
        LeadId::AVF,
        LeadId::V1,
        LeadId::V2,
        LeadId::V3,
        LeadId::V4,
        LeadId::V5,
        LeadId::V6,
    ];

    pub fn token(self) -> &'static str {
        match self {
            LeadId::I => "I",
            LeadId::II => "II",
            LeadId::III => "III",
            LeadId::AVR => "aVR",
            LeadId::AVL => "aVL",
            LeadId::AVF => "aVF",
            LeadId::V1 => "V1",
            LeadId::V2 => "V2",
            LeadId::V3 => "V3",
            LeadId::V4 => "V4",
            LeadId::V5 => "V5",
            LeadId::V6 => "V6",
        }
    }
}

impl fmt::Display for LeadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for LeadId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        LeadId::ALL
            .iter()
            .copied()
            .find(|l| l.token() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown lead token {s:?}")))
    }
}

/// The nine cardiac-arrhythmia classes, in their stable 0..8 encoding order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CaLabel {
    Normal,
    Af,
    IAvb,
    Lbbb,
    Rbbb,
    Pac,
    Pvc,
    Std,
    Ste,
}

impl CaLabel {
    pub const COUNT: usize = 9;

    pub const ALL: [CaLabel; 9] = [
        CaLabel::Normal,
        CaLabel::Af,
        CaLabel::IAvb,
        CaLabel::Lbbb,
        CaLabel::Rbbb,
        CaLabel::Pac,
        CaLabel::Pvc,
        CaLabel::Std,
        CaLabel::Ste,
    ];

    pub fn token(self) -> &'static str {
        match self {
            CaLabel::Normal => "Normal",
            CaLabel::Af => "AF",
            CaLabel::IAvb => "I-AVB",
            CaLabel::Lbbb => "LBBB",
            CaLabel::Rbbb => "RBBB",
            CaLabel::Pac => "PAC",
            CaLabel::Pvc => "PVC",
            CaLabel::Std => "STD",
            CaLabel::Ste => "STE",
        }
    }

    /// Stable integer encoding, 0..=8 in declaration order.
    pub fn index(self) -> usize {
        CaLabel::ALL.iter().position(|&c| c == self).unwrap()
    }

    pub fn from_index(i: usize) -> Result<CaLabel> {
        CaLabel::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::Invalid(format!("class index {i} out of range 0..9")))
    }
}

impl fmt::Display for CaLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for CaLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CaLabel::ALL
            .iter()
            .copied()
            .find(|c| c.token() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown label token {s:?}")))
    }
}

// ── Recordings ───────────────────────────────────────────────────────────────

/// A single-lead amplitude sequence with its sampling rate and class label.
#[derive(Clone, Debug, PartialEq)]
pub struct EcgRecording {
    pub id: String,
    pub lead: LeadId,
    /// Sampling rate in Hz, strictly positive.
    pub fs: f64,
    /// Amplitudes in millivolts; non-empty, all finite.
    pub samples: Vec<f64>,
    pub label: CaLabel,
}

impl EcgRecording {
    pub fn new(
        id: impl Into<String>,
        lead: LeadId,
        fs: f64,
        samples: Vec<f64>,
        label: CaLabel,
    ) -> Result<Self> {
        let rec = Self {
            id: id.into(),
            lead,
            fs,
            samples,
            label,
        };
        rec.validate()?;
        Ok(rec)
    }

    fn validate(&self) -> Result<()> {
        if !(self.fs > 0.0) || !self.fs.is_finite() {
            return Err(Error::Invalid(format!(
                "recording {:?}: fs must be positive, got {}",
                self.id, self.fs
            )));
        }
        if self.samples.is_empty() {
            return Err(Error::Invalid(format!(
                "recording {:?}: empty sample sequence",
                self.id
            )));
        }
        if let Some(i) = self.samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "recording {:?}: non-finite amplitude at sample {i}",
                self.id
            )));
        }
        Ok(())
    }

    /// Duration in seconds covered by the samples.
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    /// Parses a recording file; id and label come from the manifest entry,
    /// which must agree with the file header on fs and lead.
    pub fn load(path: &Path, entry: &ManifestEntry) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty recording file".into()))?;

        let mut fs = None;
        let mut lead = None;
        let mut n = None;
        for tok in header.split_whitespace() {
            let (key, val) = tok
                .split_once('=')
                .ok_or_else(|| parse_err(1, format!("expected key=value, got {tok:?}")))?;
            match key {
                "fs" => {
                    let v: f64 = val
                        .parse()
                        .map_err(|_| parse_err(1, format!("bad fs value {val:?}")))?;
                    fs = Some(v);
                }
                "lead" => lead = Some(val.parse::<LeadId>().map_err(|e| parse_err(1, e.to_string()))?),
                "n" => {
                    let v: usize = val
                        .parse()
                        .map_err(|_| parse_err(1, format!("bad sample count {val:?}")))?;
                    n = Some(v);
                }
                other => return Err(parse_err(1, format!("unknown header key {other:?}"))),
            }
        }
        let fs = fs.ok_or_else(|| parse_err(1, "header missing fs".into()))?;
        let lead = lead.ok_or_else(|| parse_err(1, "header missing lead".into()))?;
        let n = n.ok_or_else(|| parse_err(1, "header missing n".into()))?;

        if (fs - entry.fs).abs() > 1e-9 {
            return Err(parse_err(
                1,
                format!("fs {} disagrees with manifest entry fs {}", fs, entry.fs),
            ));
        }
        if lead != entry.lead {
            return Err(parse_err(
                1,
                format!("lead {lead} disagrees with manifest entry lead {}", entry.lead),
            ));
        }

        let mut samples = Vec::with_capacity(n);
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            if line.trim().is_empty() {
                return Err(parse_err(lineno, "blank amplitude line".into()));
            }
            let v: f64 = line
                .trim()
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad amplitude {line:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, format!("non-finite amplitude {line:?}")));
            }
            samples.push(v);
        }
        if samples.len() != n {
            return Err(parse_err(
                1,
                format!("header declares {n} samples, file has {}", samples.len()),
            ));
        }
        EcgRecording::new(entry.id.clone(), lead, fs, samples, entry.label)
    }

    /// Writes the recording in the text format above. Amplitudes use the
    /// shortest round-trip decimal form, so save→load is value-exact and a
    /// re-save is byte-identical.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let mut out = String::with_capacity(self.samples.len() * 8 + 64);
        out.push_str(&format!(
            "fs={} lead={} n={}\n",
            self.fs,
            self.lead,
            self.samples.len()
        ));
        for v in &self.samples {
            out.push_str(&format!("{v}\n"));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

// ── Manifests ────────────────────────────────────────────────────────────────

/// One manifest row; `path` is relative to the manifest file's directory.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
    pub lead: LeadId,
    pub fs: f64,
    pub label: CaLabel,
}

/// An ordered list of recording entries plus a free-form source note.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub note: String,
    /// Directory recording paths are resolved against.
    pub base_dir: PathBuf,
}

const MANIFEST_HEADER: &str = "id,path,lead,fs,label";

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>, note: impl Into<String>, base_dir: PathBuf) -> Result<Self> {
        let m = Self {
            entries,
            note: note.into(),
            base_dir,
        };
        m.check_unique_ids()?;
        Ok(m)
    }

    fn check_unique_ids(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::Invalid(format!("duplicate id {:?} in manifest", e.id)));
            }
        }
        Ok(())
    }

    /// Parses a manifest file. Structural invariants (field counts, tokens,
    /// unique ids) are checked here; the referenced recording files are
    /// validated when loaded.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base_dir = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };

        let mut note = String::new();
        let mut entries = Vec::new();
        let mut seen = BTreeSet::new();
        let mut header_seen = false;
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(n) = comment.trim_start().strip_prefix("note:") {
                    note = n.trim().to_string();
                }
                continue;
            }
            if !header_seen {
                if line != MANIFEST_HEADER {
                    return Err(parse_err(
                        lineno,
                        format!("expected header {MANIFEST_HEADER:?}, got {line:?}"),
                    ));
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(parse_err(
                    lineno,
                    format!("expected 5 comma-separated fields, got {}", fields.len()),
                ));
            }
            let id = fields[0].trim().to_string();
            if id.is_empty() {
                return Err(parse_err(lineno, "empty id".into()));
            }
            if !seen.insert(id.clone()) {
                return Err(parse_err(lineno, format!("duplicate id {id:?}")));
            }
            let lead = fields[2]
                .trim()
                .parse::<LeadId>()
                .map_err(|e| parse_err(lineno, e.to_string()))?;
            let fs: f64 = fields[3]
                .trim()
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad fs {:?}", fields[3])))?;
            if !(fs > 0.0) {
                return Err(parse_err(lineno, format!("fs must be positive, got {fs}")));
            }
            let label = fields[4]
                .trim()
                .parse::<CaLabel>()
                .map_err(|e| parse_err(lineno, e.to_string()))?;
            entries.push(ManifestEntry {
                id,
                path: PathBuf::from(fields[1].trim()),
                lead,
                fs,
                label,
            });
        }
        if !header_seen {
            return Err(parse_err(1, format!("missing header {MANIFEST_HEADER:?}")));
        }
        DatasetManifest::new(entries, note, base_dir)
    }

    /// Writes the manifest; deterministic byte-for-byte for equal content.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.check_unique_ids()?;
        let mut out = String::new();
        if !self.note.is_empty() {
            out.push_str(&format!("# note: {}\n", self.note));
        }
        out.push_str(MANIFEST_HEADER);
        out.push('\n');
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.id,
                e.path.display(),
                e.lead,
                e.fs,
                e.label
            ));
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Loads every referenced recording, in manifest order.
    pub fn load_all(&self) -> Result<Vec<EcgRecording>> {
        self.entries
            .iter()
            .map(|e| EcgRecording::load(&self.base_dir.join(&e.path), e))
            .collect()
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.id.clone()).collect()
    }
}

// ── Windowing ────────────────────────────────────────────────────────────────

/// What to do when a recording is shorter than the requested window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowPolicy {
    /// Reject inputs shorter than the window.
    CropCenter,
    /// Zero-pad the tail of short inputs.
    PadZeroTail,
}

impl FromStr for WindowPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "crop_center" => Ok(WindowPolicy::CropCenter),
            "pad_zero_tail" => Ok(WindowPolicy::PadZeroTail),
            other => Err(Error::Config(format!("unknown window policy {other:?}"))),
        }
    }
}

/// Cuts a fixed-duration window out of a recording. Output length is exactly
/// `round(window_seconds * fs)`; longer inputs are center-cropped (excess
/// split evenly, floor on the leading side), shorter inputs are zero-padded
/// at the tail or rejected depending on policy. fs never changes.
pub fn window_signal(
    rec: &EcgRecording,
    window_seconds: f64,
    policy: WindowPolicy,
) -> Result<EcgRecording> {
    if !(window_seconds > 0.0) {
        return Err(Error::Invalid(format!(
            "window_seconds must be positive, got {window_seconds}"
        )));
    }
    let target = (window_seconds * rec.fs).round() as usize;
    if target == 0 {
        return Err(Error::Invalid(format!(
            "window of {window_seconds} s at {} Hz rounds to zero samples",
            rec.fs
        )));
    }
    let len = rec.samples.len();
    let samples = if len >= target {
        let start = (len - target) / 2;
        rec.samples[start..start + target].to_vec()
    } else {
        match policy {
            WindowPolicy::CropCenter => {
                return Err(Error::Invalid(format!(
                    "recording {:?} has {len} samples, shorter than the {target}-sample window",
                    rec.id
                )))
            }
            WindowPolicy::PadZeroTail => {
                let mut s = rec.samples.clone();
                s.resize(target, 0.0);
                s
            }
        }
    };
    EcgRecording::new(rec.id.clone(), rec.lead, rec.fs, samples, rec.label)
}

// ── Fold planning ────────────────────────────────────────────────────────────

/// Train/validation/test id sets for one rotation of the fold plan.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

/// A deterministic `n_folds`-way partition of recording ids.
///
/// Ids are shuffled with [`Lcg64`] keyed by `seed` and dealt round-robin, so
/// fold sizes differ by at most one. For test fold `k` the validation fold is
/// `(k + 1) % n_folds` and the remaining folds train, which realizes the
/// 8-1-1 scheme at `n_folds = 10`.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub seed: u64,
    assignment: BTreeMap<String, usize>,
}

impl FoldPlan {
    pub fn new(ids: &[String], n_folds: usize, seed: u64) -> Result<Self> {
        if n_folds == 0 {
            return Err(Error::Invalid("n_folds must be at least 1".into()));
        }
        if ids.len() < n_folds {
            return Err(Error::Invalid(format!(
                "{} ids cannot fill {n_folds} folds",
                ids.len()
            )));
        }
        let unique: BTreeSet<&String> = ids.iter().collect();
        if unique.len() != ids.len() {
            return Err(Error::Invalid("fold plan ids must be unique".into()));
        }
        let mut shuffled: Vec<&String> = ids.iter().collect();
        Lcg64::new(seed).shuffle(&mut shuffled);
        let assignment = shuffled
            .iter()
            .enumerate()
            .map(|(i, id)| ((*id).clone(), i % n_folds))
            .collect();
        Ok(Self {
            n_folds,
            seed,
            assignment,
        })
    }

    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.assignment.get(id).copied()
    }

    /// Ids in fold `k`, in lexicographic order.
    pub fn fold_ids(&self, k: usize) -> Vec<String> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f == k)
            .map(|(id, _)| id.clone())
            .collect()
    }

    /// The 8-1-1 split for test fold `k`: validation is fold
    /// `(k + 1) % n_folds`, training is everything else. The scheme needs at
    /// least three folds; at `n_folds = 2` (smoke runs) the validation fold
    /// doubles as the training fold.
    pub fn split_for_test_fold(&self, k: usize) -> Result<FoldSplit> {
        if k >= self.n_folds {
            return Err(Error::Invalid(format!(
                "test fold {k} out of range 0..{}",
                self.n_folds
            )));
        }
        let val = (k + 1) % self.n_folds;
        let mut split = FoldSplit {
            train: Vec::new(),
            validation: Vec::new(),
            test: Vec::new(),
        };
        for (id, &f) in &self.assignment {
            if f == k {
                split.test.push(id.clone());
            } else if f == val {
                split.validation.push(id.clone());
            } else {
                split.train.push(id.clone());
            }
        }
        if split.train.is_empty() {
            split.train = split.validation.clone();
        }
        Ok(split)
    }

    pub fn ids(&self) -> impl Iterator<Item = &String> {
        self.assignment.keys()
    }
}

// ── Synthetic generation parameters ──────────────────────────────────────────

/// Parameters for the synthetic ECG generator (see [`crate::synth`]).
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticEcgParams {
    pub heart_rate_bpm: f64,
    pub fs: f64,
    pub duration_s: f64,
    pub class: CaLabel,
    /// Standard deviation of additive Gaussian noise, millivolts.
    pub noise_mv: f64,
}

impl SyntheticEcgParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.heart_rate_bpm > 0.0) {
            return Err(Error::Invalid("heart rate must be positive".into()));
        }
        if !(self.fs > 0.0) {
            return Err(Error::Invalid("fs must be positive".into()));
        }
        if !(self.duration_s > 0.0) {
            return Err(Error::Invalid("duration must be positive".into()));
        }
        if self.noise_mv < 0.0 {
            return Err(Error::Invalid("noise amplitude must be non-negative".into()));
        }
        if self.duration_s * self.fs < 1.0 {
            return Err(Error::Invalid(format!(
                "duration {} s at {} Hz yields no samples",
                self.duration_s, self.fs
            )));
        }
        Ok(())
    }
}
