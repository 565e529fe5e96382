//! Data model for a two-stage sampled assessment: students nested in schools
//! nested in explicit strata, plus loading, validation and replacement linking.
//!
//! Files are comma-separated with a header row:
//!
//! ```text
//! students.csv  student_id,school_id,z2,student_weight,pv1,...,pv5
//! schools.csv   school_id,stratum_id,z1,enrollment,school_weight,sampled_student_count,replacement_of
//! strata.csv    stratum_id,frame_enrollment
//! ```
//!
//! PV cells are empty for non-participating students (`z2 = 0`). Stratum
//! shares are always derived from `frame_enrollment`, never from sample counts.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{BoundsError, Result};

pub const DEFAULT_PV_COUNT: usize = 5;
pub const SHARE_TOLERANCE: f64 = 1e-9;

pub const STUDENTS_FILE: &str = "students.csv";
pub const SCHOOLS_FILE: &str = "schools.csv";
pub const STRATA_FILE: &str = "strata.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentRecord {
    pub student_id: String,
    pub school_id: String,
    /// Participation if sampled.
    pub z2: bool,
    /// Inverse joint inclusion probability of school and student.
    pub student_weight: f64,
    /// Plausible values, present iff `z2`.
    pub pv: Option<Vec<f64>>,
}

impl StudentRecord {
    pub fn participant(
        student_id: impl Into<String>,
        school_id: impl Into<String>,
        student_weight: f64,
        pv: Vec<f64>,
    ) -> Self {
        StudentRecord {
            student_id: student_id.into(),
            school_id: school_id.into(),
            z2: true,
            student_weight,
            pv: Some(pv),
        }
    }

    pub fn non_participant(student_id: impl Into<String>, school_id: impl Into<String>, student_weight: f64) -> Self {
        StudentRecord {
            student_id: student_id.into(),
            school_id: school_id.into(),
            z2: false,
            student_weight,
            pv: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchoolRecord {
    pub school_id: String,
    pub stratum_id: String,
    /// Participation if sampled.
    pub z1: bool,
    /// Target-population enrollment per the school frame (measure of size).
    pub enrollment: u64,
    /// Inverse school inclusion probability.
    pub school_weight: f64,
    /// Students sampled in the field; may exceed the number of student rows
    /// when non-participant rows are omitted from the file.
    pub sampled_student_count: u64,
    /// Recipient school this row replaces, if it is a replacement school.
    pub replacement_of: Option<String>,
}

impl SchoolRecord {
    pub fn new(
        school_id: impl Into<String>,
        stratum_id: impl Into<String>,
        z1: bool,
        enrollment: u64,
        school_weight: f64,
        sampled_student_count: u64,
    ) -> Self {
        SchoolRecord {
            school_id: school_id.into(),
            stratum_id: stratum_id.into(),
            z1,
            enrollment,
            school_weight,
            sampled_student_count,
            replacement_of: None,
        }
    }

    pub fn replacing(mut self, recipient: impl Into<String>) -> Self {
        self.replacement_of = Some(recipient.into());
        self
    }

    pub fn is_replacement(&self) -> bool {
        self.replacement_of.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumRecord {
    pub stratum_id: String,
    pub frame_enrollment: f64,
    /// Share of the target population in this stratum, from the frame.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub students: Vec<StudentRecord>,
    pub schools: Vec<SchoolRecord>,
    pub strata: Vec<StratumRecord>,
    pub pv_count: usize,
    /// Recipient slots filled by a replacement school (recipient -> replacement).
    /// Empty unless the dataset is a view produced by [`link_replacements`].
    #[serde(default)]
    pub filled_slots: BTreeMap<String, String>,
}

/// Strata with shares computed from their frame enrollments.
pub fn strata_from_frame<I, S>(frames: I) -> Vec<StratumRecord>
where
    I: IntoIterator<Item = (S, f64)>,
    S: Into<String>,
{
    let frames: Vec<(String, f64)> = frames.into_iter().map(|(id, f)| (id.into(), f)).collect();
    let total: f64 = frames.iter().map(|(_, f)| f).sum();
    frames
        .into_iter()
        .map(|(stratum_id, frame_enrollment)| StratumRecord {
            stratum_id,
            frame_enrollment,
            share: frame_enrollment / total,
        })
        .collect()
}

impl Dataset {
    /// Assemble and validate a dataset; shares are derived from the frame.
    pub fn new<I, S>(
        students: Vec<StudentRecord>,
        schools: Vec<SchoolRecord>,
        frames: I,
        pv_count: usize,
    ) -> Result<Dataset>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let dataset = Dataset {
            students,
            schools,
            strata: strata_from_frame(frames),
            pv_count,
            filled_slots: BTreeMap::new(),
        };
        dataset.checked()
    }

    pub(crate) fn checked(self) -> Result<Dataset> {
        let report = validate(&self);
        if report.has_errors() {
            Err(BoundsError::Validation(report))
        } else {
            Ok(self)
        }
    }

    pub fn school(&self, school_id: &str) -> Option<&SchoolRecord> {
        self.schools.iter().find(|s| s.school_id == school_id)
    }

    pub fn stratum(&self, stratum_id: &str) -> Option<&StratumRecord> {
        self.strata.iter().find(|s| s.stratum_id == stratum_id)
    }

    /// Student rows grouped by school id, in file order within each school.
    pub fn students_by_school(&self) -> HashMap<&str, Vec<&StudentRecord>> {
        let mut map: HashMap<&str, Vec<&StudentRecord>> = HashMap::new();
        for st in &self.students {
            map.entry(st.school_id.as_str()).or_default().push(st);
        }
        map
    }

    /// Schools of a stratum, in file order.
    pub fn schools_in<'a>(&'a self, stratum_id: &'a str) -> impl Iterator<Item = &'a SchoolRecord> {
        self.schools.iter().filter(move |s| s.stratum_id == stratum_id)
    }

    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        write_dataset(
            self,
            &dir.join(STUDENTS_FILE),
            &dir.join(SCHOOLS_FILE),
            &dir.join(STRATA_FILE),
        )
    }

    pub fn load_from_dir(dir: &Path) -> Result<Dataset> {
        load_dataset(
            &dir.join(STUDENTS_FILE),
            &dir.join(SCHOOLS_FILE),
            &dir.join(STRATA_FILE),
        )
    }
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub severity: Severity,
    /// Offending record, e.g. `student 17` or `strata`.
    pub record: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.violations.iter().any(|v| v.severity == Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.severity == Severity::Error)
    }

    fn error(&mut self, record: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            severity: Severity::Error,
            record: record.into(),
            message: message.into(),
        });
    }

    fn warning(&mut self, record: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            severity: Severity::Warning,
            record: record.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            let tag = match v.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            writeln!(f, "  {tag}: {}: {}", v.record, v.message)?;
        }
        Ok(())
    }
}

/// Check every dataset invariant. Violations are returned as data; an empty
/// report means the dataset is valid.
pub fn validate(dataset: &Dataset) -> ValidationReport {
    let mut report = ValidationReport::default();

    if dataset.pv_count == 0 {
        report.error("dataset", "pv_count must be at least 1");
    }

    // strata
    let mut stratum_ids = HashSet::new();
    for st in &dataset.strata {
        let rec = format!("stratum {}", st.stratum_id);
        if !stratum_ids.insert(st.stratum_id.as_str()) {
            report.error(&rec, "duplicate stratum_id");
        }
        if !(st.frame_enrollment.is_finite() && st.frame_enrollment > 0.0) {
            report.error(
                &rec,
                format!("frame_enrollment {} is not positive", st.frame_enrollment),
            );
        }
        if !(st.share > 0.0 && st.share <= 1.0 + SHARE_TOLERANCE) {
            report.error(&rec, format!("share {} outside (0, 1]", st.share));
        }
    }
    if dataset.strata.is_empty() {
        report.error("strata", "no strata");
    } else {
        let share_sum: f64 = dataset.strata.iter().map(|s| s.share).sum();
        if (share_sum - 1.0).abs() > SHARE_TOLERANCE {
            report.error("strata", format!("stratum shares sum to {share_sum}, not 1"));
        } else {
            let frame_total: f64 = dataset.strata.iter().map(|s| s.frame_enrollment).sum();
            for st in &dataset.strata {
                let derived = st.frame_enrollment / frame_total;
                if (st.share - derived).abs() > SHARE_TOLERANCE {
                    report.error(
                        format!("stratum {}", st.stratum_id),
                        format!("share {} is not the frame share {derived}", st.share),
                    );
                }
            }
        }
    }

    // schools
    let mut schools: HashMap<&str, &SchoolRecord> = HashMap::new();
    for sc in &dataset.schools {
        let rec = format!("school {}", sc.school_id);
        if schools.insert(sc.school_id.as_str(), sc).is_some() {
            report.error(&rec, "duplicate school_id");
        }
        if !stratum_ids.contains(sc.stratum_id.as_str()) {
            report.error(&rec, format!("unknown stratum {}", sc.stratum_id));
        }
        if !(sc.school_weight.is_finite() && sc.school_weight >= 1.0) {
            report.error(&rec, format!("school_weight {} is below 1", sc.school_weight));
        }
        if sc.enrollment < 1 {
            report.error(&rec, "enrollment must be at least 1");
        }
        if sc.z1 && sc.sampled_student_count == 0 && !sc.is_replacement() {
            report.warning(&rec, "participating school with no sampled students");
        }
    }

    let mut recipients: HashMap<&str, &str> = HashMap::new();
    for sc in &dataset.schools {
        let Some(target) = sc.replacement_of.as_deref() else {
            continue;
        };
        let rec = format!("school {}", sc.school_id);
        if target == sc.school_id {
            report.error(&rec, "school cannot replace itself");
            continue;
        }
        match schools.get(target) {
            None => report.error(&rec, format!("replacement_of names unknown school {target}")),
            Some(recipient) => {
                if recipient.z1 {
                    report.error(&rec, format!("recipient {target} participates (z1 = 1)"));
                }
                if recipient.stratum_id != sc.stratum_id {
                    report.error(&rec, format!("recipient {target} lies in another stratum"));
                }
                if recipient.is_replacement() {
                    report.error(
                        &rec,
                        format!("recipient {target} is itself a replacement (chain or cycle)"),
                    );
                }
            }
        }
        if let Some(prev) = recipients.insert(target, sc.school_id.as_str()) {
            report.error(&rec, format!("recipient {target} already replaced by {prev}"));
        }
    }
    for (recipient, replacement) in &dataset.filled_slots {
        if !schools.contains_key(recipient.as_str()) {
            report.error(
                format!("school {recipient}"),
                format!("filled slot for unknown recipient (replacement {replacement})"),
            );
        }
    }

    // students
    let mut student_ids = HashSet::new();
    let mut rows_per_school: HashMap<&str, u64> = HashMap::new();
    for st in &dataset.students {
        let rec = format!("student {}", st.student_id);
        if !student_ids.insert(st.student_id.as_str()) {
            report.error(&rec, "duplicate student_id");
        }
        if !(st.student_weight.is_finite() && st.student_weight > 0.0) {
            report.error(
                &rec,
                format!("student_weight {} is not positive and finite", st.student_weight),
            );
        }
        match (&st.pv, st.z2) {
            (Some(_), false) => report.error(&rec, "non-participant (z2 = 0) carries plausible values"),
            (None, true) => report.error(&rec, "participant (z2 = 1) has no plausible values"),
            (Some(pv), true) => {
                if pv.len() != dataset.pv_count {
                    report.error(
                        &rec,
                        format!("has {} plausible values, expected {}", pv.len(), dataset.pv_count),
                    );
                }
                if let Some(k) = pv.iter().position(|v| !v.is_finite()) {
                    report.error(&rec, format!("plausible value pv{} is not finite", k + 1));
                }
            }
            (None, false) => {}
        }
        match schools.get(st.school_id.as_str()) {
            None => report.error(&rec, format!("unknown school {}", st.school_id)),
            Some(sc) if !sc.z1 => report.error(
                &rec,
                format!("belongs to non-participating school {} (z1 = 0)", st.school_id),
            ),
            Some(_) => *rows_per_school.entry(st.school_id.as_str()).or_default() += 1,
        }
    }
    for sc in &dataset.schools {
        let rows = rows_per_school.get(sc.school_id.as_str()).copied().unwrap_or(0);
        if sc.sampled_student_count < rows {
            report.error(
                format!("school {}", sc.school_id),
                format!(
                    "sampled_student_count {} is below its {rows} student rows",
                    sc.sampled_student_count
                ),
            );
        }
    }

    for st in &dataset.strata {
        if !dataset.schools.iter().any(|s| s.stratum_id == st.stratum_id) {
            report.warning(format!("stratum {}", st.stratum_id), "no sampled schools");
        }
    }

    report
}

// ---------------------------------------------------------------------------
// Replacement schools

/// View in which each participating replacement school's students fill the
/// design slot of its recipient. The recipient keeps its stratum, enrollment
/// and school weight and counts as participating; replacement students'
/// weights swap the replacement's school component for the recipient's.
/// Applying the view twice is the identity.
pub fn link_replacements(dataset: &Dataset) -> Result<Dataset> {
    let mut by_id: HashMap<&str, usize> = HashMap::new();
    for (i, s) in dataset.schools.iter().enumerate() {
        by_id.insert(s.school_id.as_str(), i);
    }

    // recipient index -> replacement index
    let mut links: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, sc) in dataset.schools.iter().enumerate() {
        let Some(target) = sc.replacement_of.as_deref() else {
            continue;
        };
        let integrity = |message: String| BoundsError::Integrity {
            record: format!("school {}", sc.school_id),
            message,
        };
        let &r = by_id
            .get(target)
            .ok_or_else(|| integrity(format!("replacement_of names unknown school {target}")))?;
        let recipient = &dataset.schools[r];
        if r == i || recipient.is_replacement() {
            return Err(integrity(format!("replacement_of {target} forms a chain or cycle")));
        }
        if recipient.stratum_id != sc.stratum_id {
            return Err(integrity(format!("recipient {target} lies in another stratum")));
        }
        if recipient.z1 {
            return Err(integrity(format!("recipient {target} participates (z1 = 1)")));
        }
        if let Some(prev) = links.insert(r, i) {
            return Err(integrity(format!(
                "recipient {target} already replaced by {}",
                dataset.schools[prev].school_id
            )));
        }
    }
    if links.is_empty() {
        return Ok(dataset.clone());
    }

    let mut view = dataset.clone();
    let mut renamed: HashMap<&str, (&str, f64)> = HashMap::new();
    for (&r, &i) in &links {
        let replacement = &dataset.schools[i];
        if !replacement.z1 {
            continue;
        }
        let recipient = &dataset.schools[r];
        let slot = &mut view.schools[r];
        slot.z1 = true;
        slot.sampled_student_count = replacement.sampled_student_count;
        view.filled_slots
            .insert(recipient.school_id.clone(), replacement.school_id.clone());
        renamed.insert(
            replacement.school_id.as_str(),
            (
                recipient.school_id.as_str(),
                recipient.school_weight / replacement.school_weight,
            ),
        );
    }
    for st in &mut view.students {
        if let Some(&(recipient, factor)) = renamed.get(st.school_id.as_str()) {
            st.school_id = recipient.to_string();
            st.student_weight *= factor;
        }
    }
    let replacement_ids: HashSet<&str> = links.values().map(|&i| dataset.schools[i].school_id.as_str()).collect();
    view.schools.retain(|s| !replacement_ids.contains(s.school_id.as_str()));
    Ok(view)
}

// ---------------------------------------------------------------------------
// File IO

fn io_error(path: &Path, e: impl fmt::Display) -> BoundsError {
    BoundsError::Io {
        file: path.display().to_string(),
        message: e.to_string(),
    }
}

struct Table {
    file: String,
    headers: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path) -> Result<Table> {
        let file = path.display().to_string();
        let handle = File::open(path).map_err(|e| io_error(path, e))?;
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(handle);
        let headers = reader
            .headers()
            .map_err(|e| io_error(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| BoundsError::Parse {
                file: file.clone(),
                line: i as u64 + 2,
                column: String::new(),
                message: e.to_string(),
            })?;
            rows.push(rec);
        }
        Ok(Table { file, headers, rows })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| BoundsError::Parse {
                file: self.file.clone(),
                line: 1,
                column: name.to_string(),
                message: "required column missing from header".into(),
            })
    }

    fn optional_column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn cell(&self, row: usize, col: usize) -> &str {
        self.rows[row].get(col).unwrap_or("")
    }

    fn parse_err(&self, row: usize, col: usize, message: impl Into<String>) -> BoundsError {
        BoundsError::Parse {
            file: self.file.clone(),
            line: row as u64 + 2,
            column: self.headers[col].clone(),
            message: message.into(),
        }
    }

    fn text(&self, row: usize, col: usize) -> Result<String> {
        let v = self.cell(row, col);
        if v.is_empty() {
            Err(self.parse_err(row, col, "empty value"))
        } else {
            Ok(v.to_string())
        }
    }

    fn real(&self, row: usize, col: usize) -> Result<f64> {
        let v = self.cell(row, col);
        v.parse::<f64>()
            .map_err(|_| self.parse_err(row, col, format!("`{v}` is not a number")))
    }

    fn count(&self, row: usize, col: usize) -> Result<u64> {
        let v = self.cell(row, col);
        v.parse::<u64>()
            .map_err(|_| self.parse_err(row, col, format!("`{v}` is not a nonnegative integer")))
    }

    fn flag(&self, row: usize, col: usize) -> Result<bool> {
        match self.cell(row, col) {
            "1" => Ok(true),
            "0" => Ok(false),
            v => Err(self.parse_err(row, col, format!("`{v}` is not 0 or 1"))),
        }
    }
}

/// Load the three files, derive stratum shares from the frame and validate.
pub fn load_dataset(student_path: &Path, school_path: &Path, stratum_path: &Path) -> Result<Dataset> {
    let strata_table = Table::read(stratum_path)?;
    let c_id = strata_table.column("stratum_id")?;
    let c_frame = strata_table.column("frame_enrollment")?;
    let mut frames = Vec::with_capacity(strata_table.rows.len());
    for r in 0..strata_table.rows.len() {
        frames.push((strata_table.text(r, c_id)?, strata_table.real(r, c_frame)?));
    }

    let t = Table::read(school_path)?;
    let (c_id, c_stratum, c_z1, c_enr, c_w, c_n) = (
        t.column("school_id")?,
        t.column("stratum_id")?,
        t.column("z1")?,
        t.column("enrollment")?,
        t.column("school_weight")?,
        t.column("sampled_student_count")?,
    );
    let c_repl = t.optional_column("replacement_of");
    let mut schools = Vec::with_capacity(t.rows.len());
    for r in 0..t.rows.len() {
        let replacement_of = c_repl
            .map(|c| t.cell(r, c))
            .filter(|v| !v.is_empty())
            .map(str::to_string);
        schools.push(SchoolRecord {
            school_id: t.text(r, c_id)?,
            stratum_id: t.text(r, c_stratum)?,
            z1: t.flag(r, c_z1)?,
            enrollment: t.count(r, c_enr)?,
            school_weight: t.real(r, c_w)?,
            sampled_student_count: t.count(r, c_n)?,
            replacement_of,
        });
    }

    let t = Table::read(student_path)?;
    let (c_id, c_school, c_z2, c_w) = (
        t.column("student_id")?,
        t.column("school_id")?,
        t.column("z2")?,
        t.column("student_weight")?,
    );
    let mut pv_cols = Vec::new();
    while let Some(c) = t.optional_column(&format!("pv{}", pv_cols.len() + 1)) {
        pv_cols.push(c);
    }
    if pv_cols.is_empty() {
        return Err(BoundsError::Parse {
            file: t.file.clone(),
            line: 1,
            column: "pv1".into(),
            message: "no plausible-value columns".into(),
        });
    }
    let mut students = Vec::with_capacity(t.rows.len());
    for r in 0..t.rows.len() {
        let z2 = t.flag(r, c_z2)?;
        let cells: Vec<&str> = pv_cols.iter().map(|&c| t.cell(r, c)).collect();
        let pv = if cells.iter().all(|v| v.is_empty()) {
            None
        } else {
            let mut values = Vec::with_capacity(cells.len());
            for &c in &pv_cols {
                values.push(t.real(r, c)?);
            }
            Some(values)
        };
        students.push(StudentRecord {
            student_id: t.text(r, c_id)?,
            school_id: t.text(r, c_school)?,
            z2,
            student_weight: t.real(r, c_w)?,
            pv,
        });
    }

    Dataset::new(students, schools, frames, pv_cols.len())
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| io_error(path, e))
}

/// Write a dataset in the three-file schema. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_dataset(dataset: &Dataset, student_path: &Path, school_path: &Path, stratum_path: &Path) -> Result<()> {
    let flag = |b: bool| if b { "1" } else { "0" };

    let mut w = writer(student_path)?;
    let mut header = vec![
        "student_id".to_string(),
        "school_id".into(),
        "z2".into(),
        "student_weight".into(),
    ];
    header.extend((1..=dataset.pv_count).map(|k| format!("pv{k}")));
    w.write_record(&header).map_err(|e| io_error(student_path, e))?;
    for st in &dataset.students {
        let mut row = vec![
            st.student_id.clone(),
            st.school_id.clone(),
            flag(st.z2).to_string(),
            st.student_weight.to_string(),
        ];
        match &st.pv {
            Some(pv) => row.extend(pv.iter().map(f64::to_string)),
            None => row.extend(std::iter::repeat_n(String::new(), dataset.pv_count)),
        }
        w.write_record(&row).map_err(|e| io_error(student_path, e))?;
    }
    w.flush().map_err(|e| io_error(student_path, e))?;

    let mut w = writer(school_path)?;
    w.write_record([
        "school_id",
        "stratum_id",
        "z1",
        "enrollment",
        "school_weight",
        "sampled_student_count",
        "replacement_of",
    ])
    .map_err(|e| io_error(school_path, e))?;
    for sc in &dataset.schools {
        w.write_record([
            sc.school_id.as_str(),
            sc.stratum_id.as_str(),
            flag(sc.z1),
            &sc.enrollment.to_string(),
            &sc.school_weight.to_string(),
            &sc.sampled_student_count.to_string(),
            sc.replacement_of.as_deref().unwrap_or(""),
        ])
        .map_err(|e| io_error(school_path, e))?;
    }
    w.flush().map_err(|e| io_error(school_path, e))?;

    let mut w = writer(stratum_path)?;
    w.write_record(["stratum_id", "frame_enrollment"])
        .map_err(|e| io_error(stratum_path, e))?;
    for st in &dataset.strata {
        w.write_record([st.stratum_id.as_str(), &st.frame_enrollment.to_string()])
            .map_err(|e| io_error(stratum_path, e))?;
    }
    w.flush().map_err(|e| io_error(stratum_path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> Dataset {
        Dataset::new(
            vec![StudentRecord::participant("st1", "sc1", 2.0, vec![500.0; 5])],
            vec![SchoolRecord::new("sc1", "w1", true, 10, 1.0, 1)],
            [("w1", 10.0)],
            5,
        )
        .unwrap()
    }

    #[test]
    fn minimal_dataset_is_valid() {
        let ds = minimal();
        assert_eq!((ds.students.len(), ds.schools.len(), ds.strata.len()), (1, 1, 1));
        assert!(validate(&ds).is_empty());
    }

    #[test]
    fn shares_come_from_frame() {
        let strata = strata_from_frame([("a", 300.0), ("b", 700.0)]);
        assert!((strata[0].share - 0.3).abs() < 1e-15);
        assert!((strata[1].share - 0.7).abs() < 1e-15);
    }

    #[test]
    fn negative_weight_is_one_violation() {
        let mut ds = minimal();
        ds.students[0].student_weight = -1.0;
        let report = validate(&ds);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].record, "student st1");
    }

    #[test]
    fn bad_share_sum_names_strata_file() {
        let mut ds = minimal();
        ds.strata[0].share = 0.98;
        let report = validate(&ds);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].record, "strata");
    }

    #[test]
    fn student_in_nonparticipating_school_rejected() {
        let err = Dataset::new(
            vec![StudentRecord::participant("st9", "sc1", 2.0, vec![500.0; 5])],
            vec![SchoolRecord::new("sc1", "w1", false, 10, 1.0, 1)],
            [("w1", 10.0)],
            5,
        )
        .unwrap_err();
        assert!(err.to_string().contains("student st9"), "{err}");
    }

    #[test]
    fn pv_presence_follows_z2() {
        let mut ds = minimal();
        ds.students.push(StudentRecord {
            pv: Some(vec![1.0; 5]),
            ..StudentRecord::non_participant("st2", "sc1", 2.0)
        });
        ds.schools[0].sampled_student_count = 2;
        let report = validate(&ds);
        assert_eq!(report.violations.len(), 1);
        assert!(report.violations[0].message.contains("non-participant"));
    }

    fn with_replacement() -> Dataset {
        let mut students = vec![StudentRecord::participant("a1", "A", 4.0, vec![500.0; 5])];
        for k in 0..4 {
            students.push(StudentRecord::participant(format!("r{k}"), "R", 6.0, vec![450.0; 5]));
        }
        Dataset::new(
            students,
            vec![
                SchoolRecord::new("A", "w", true, 20, 2.0, 1),
                SchoolRecord::new("B", "w", false, 20, 2.0, 0),
                SchoolRecord::new("R", "w", true, 30, 3.0, 4).replacing("B"),
            ],
            [("w", 100.0)],
            5,
        )
        .unwrap()
    }

    #[test]
    fn link_without_replacements_is_identity() {
        let ds = minimal();
        assert_eq!(link_replacements(&ds).unwrap(), ds);
    }

    #[test]
    fn link_fills_recipient_slot() {
        let ds = with_replacement();
        let view = link_replacements(&ds).unwrap();
        assert!(view.school("R").is_none());
        let b = view.school("B").unwrap();
        assert!(b.z1);
        assert_eq!(b.sampled_student_count, 4);
        assert_eq!(b.school_weight, 2.0);
        let moved: Vec<_> = view.students.iter().filter(|s| s.school_id == "B").collect();
        assert_eq!(moved.len(), 4);
        // 6 = 3 * 2; recipient weight 2 replaces replacement weight 3
        assert!(moved.iter().all(|s| (s.student_weight - 4.0).abs() < 1e-12));
        assert_eq!(view.filled_slots.get("B").map(String::as_str), Some("R"));
        assert!(validate(&view).is_empty());
        assert_eq!(link_replacements(&view).unwrap(), view);
    }

    #[test]
    fn double_replacement_rejected() {
        let mut ds = with_replacement();
        ds.schools
            .push(SchoolRecord::new("R2", "w", true, 30, 3.0, 0).replacing("B"));
        assert!(validate(&ds).has_errors());
        assert!(matches!(link_replacements(&ds), Err(BoundsError::Integrity { .. })));
    }

    #[test]
    fn cross_stratum_and_cycle_rejected() {
        let mut ds = with_replacement();
        ds.schools[2].stratum_id = "other".into();
        assert!(link_replacements(&ds).is_err());

        let mut ds = with_replacement();
        ds.schools[1].replacement_of = Some("R".into());
        assert!(link_replacements(&ds).is_err());
    }

    #[test]
    fn load_reports_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let ds = minimal();
        ds.write_to_dir(dir.path()).unwrap();
        std::fs::write(
            dir.path().join(SCHOOLS_FILE),
            "school_id,stratum_id,z1,enrollment,school_weight,sampled_student_count,replacement_of\nsc1,w1,yes,10,1,1,\n",
        )
        .unwrap();
        match Dataset::load_from_dir(dir.path()) {
            Err(BoundsError::Parse { line, column, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(column, "z1");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sampled_count_path_without_nonparticipant_rows() {
        let ds = Dataset::new(
            vec![StudentRecord::participant("st1", "sc1", 2.0, vec![1.0])],
            vec![SchoolRecord::new("sc1", "w1", true, 10, 1.0, 3)],
            [("w1", 10.0)],
            1,
        )
        .unwrap();
        assert!(validate(&ds).is_empty());
    }
}
