//! Tabular datasets: schema, instances, loading, normalization and the
//! labeled/unlabeled/test partitions used by the experiment harness.
//!
//! Attribute values are stored as `f64`. Nominal values hold the index of the
//! value in the attribute domain; a missing value is `NaN`.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Category that nominal missing values are mapped to at load time.
pub const MISSING_CATEGORY: &str = "?";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AttributeKind {
    Numeric { min: f64, max: f64 },
    Nominal { values: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
}

impl Attribute {
    pub fn numeric(name: impl Into<String>) -> Self {
        Attribute {
            name: name.into(),
            kind: AttributeKind::Numeric { min: 0.0, max: 0.0 },
        }
    }

    pub fn nominal<S: Into<String>>(name: impl Into<String>, values: impl IntoIterator<Item = S>) -> Self {
        Attribute {
            name: name.into(),
            kind: AttributeKind::Nominal {
                values: values.into_iter().map(Into::into).collect(),
            },
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, AttributeKind::Numeric { .. })
    }

    /// Number of nominal values; 0 for numeric attributes.
    pub fn arity(&self) -> usize {
        match &self.kind {
            AttributeKind::Nominal { values } => values.len(),
            AttributeKind::Numeric { .. } => 0,
        }
    }

    /// Renders a stored value the way it appears in input files.
    pub fn format_value(&self, v: f64) -> String {
        if v.is_nan() {
            return MISSING_CATEGORY.to_string();
        }
        match &self.kind {
            AttributeKind::Numeric { .. } => format!("{v}"),
            AttributeKind::Nominal { values } => values
                .get(v as usize)
                .cloned()
                .unwrap_or_else(|| MISSING_CATEGORY.to_string()),
        }
    }

    /// Same name, kind and nominal domain. Numeric ranges are ignored.
    pub fn same_shape(&self, other: &Attribute) -> bool {
        self.name == other.name
            && match (&self.kind, &other.kind) {
                (AttributeKind::Numeric { .. }, AttributeKind::Numeric { .. }) => true,
                (AttributeKind::Nominal { values: a }, AttributeKind::Nominal { values: b }) => a == b,
                _ => false,
            }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub values: Vec<f64>,
    pub label: Option<usize>,
    pub weight: f64,
}

impl Instance {
    pub fn new(values: Vec<f64>, label: Option<usize>) -> Self {
        Instance { values, label, weight: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: Vec<Attribute>,
    pub class_name: String,
    pub classes: Vec<String>,
    pub instances: Vec<Instance>,
}

impl Dataset {
    /// Validates the invariants and recomputes the observed numeric ranges.
    pub fn new(
        schema: Vec<Attribute>,
        class_name: impl Into<String>,
        classes: Vec<String>,
        instances: Vec<Instance>,
    ) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::Schema(format!(
                "at least 2 classes must be declared, got {}",
                classes.len()
            )));
        }
        check_unique(&classes, "class")?;
        for a in &schema {
            if let AttributeKind::Nominal { values } = &a.kind {
                if values.is_empty() {
                    return Err(Error::Schema(format!("nominal attribute '{}' has an empty domain", a.name)));
                }
                check_unique(values, &a.name)?;
            }
        }
        for (i, inst) in instances.iter().enumerate() {
            if inst.values.len() != schema.len() {
                return Err(Error::Schema(format!(
                    "instance {i} has {} values, schema has {}",
                    inst.values.len(),
                    schema.len()
                )));
            }
            if let Some(y) = inst.label {
                if y >= classes.len() {
                    return Err(Error::Schema(format!("instance {i} has unknown class index {y}")));
                }
            }
            if !(inst.weight >= 0.0) {
                return Err(Error::Schema(format!("instance {i} has negative weight")));
            }
            for (t, a) in schema.iter().enumerate() {
                let v = inst.values[t];
                if !v.is_nan() && !a.is_numeric() && (v < 0.0 || v as usize >= a.arity() || v.fract() != 0.0) {
                    return Err(Error::Schema(format!(
                        "instance {i}: value {v} outside the domain of '{}'",
                        a.name
                    )));
                }
            }
        }
        let mut d = Dataset {
            schema,
            class_name: class_name.into(),
            classes,
            instances,
        };
        d.refresh_ranges();
        Ok(d)
    }

    fn refresh_ranges(&mut self) {
        for (t, a) in self.schema.iter_mut().enumerate() {
            if let AttributeKind::Numeric { min, max } = &mut a.kind {
                let (lo, hi) = self
                    .instances
                    .iter()
                    .map(|x| x.values[t])
                    .filter(|v| !v.is_nan())
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                if lo.is_finite() {
                    *min = lo;
                    *max = hi;
                } else {
                    *min = 0.0;
                    *max = 0.0;
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn num_attributes(&self) -> usize {
        self.schema.len()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    /// True when both datasets describe the same attributes and classes.
    pub fn same_schema(&self, other: &Dataset) -> bool {
        self.classes == other.classes
            && self.schema.len() == other.schema.len()
            && self.schema.iter().zip(&other.schema).all(|(a, b)| a.same_shape(b))
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.instances.iter().all(|x| x.label.is_some())
    }

    /// Labels of a fully labeled dataset.
    pub fn labels(&self) -> Result<Vec<usize>> {
        self.instances
            .iter()
            .enumerate()
            .map(|(i, x)| x.label.ok_or_else(|| Error::Parameter(format!("instance {i} is unlabeled"))))
            .collect()
    }

    /// Unweighted instance count per class; unlabeled instances are skipped.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for y in self.instances.iter().filter_map(|x| x.label) {
            counts[y] += 1;
        }
        counts
    }

    /// Empty dataset sharing this schema.
    pub fn empty_like(&self) -> Dataset {
        self.subset(&[])
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let mut d = Dataset {
            schema: self.schema.clone(),
            class_name: self.class_name.clone(),
            classes: self.classes.clone(),
            instances: idx.iter().map(|&i| self.instances[i].clone()).collect(),
        };
        d.refresh_ranges();
        d
    }

    pub fn without_labels(&self) -> Dataset {
        let mut d = self.clone();
        for x in &mut d.instances {
            x.label = None;
        }
        d
    }

    /// Splits into the labeled and unlabeled instances, preserving order.
    pub fn partition_by_label(&self) -> (Dataset, Dataset) {
        let (l, u): (Vec<usize>, Vec<usize>) = (0..self.len()).partition(|&i| self.instances[i].label.is_some());
        (self.subset(&l), self.subset(&u))
    }

    /// Concatenation of two datasets with the same schema.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if !self.same_schema(other) {
            return Err(Error::Config("cannot concatenate datasets with different schemas".into()));
        }
        let mut d = self.clone();
        d.instances.extend(other.instances.iter().cloned());
        d.refresh_ranges();
        Ok(d)
    }

    /// Writes the dataset as CSV with a header row. Missing values and absent
    /// labels are written as `?`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.schema.iter().map(|a| a.name.as_str()).collect();
        header.push(&self.class_name);
        w.write_record(&header)?;
        for x in &self.instances {
            let mut row: Vec<String> = self.schema.iter().zip(&x.values).map(|(a, &v)| a.format_value(v)).collect();
            row.push(match x.label {
                Some(y) => self.classes[y].clone(),
                None => MISSING_CATEGORY.to_string(),
            });
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_unique(values: &[String], what: &str) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for v in values {
        if !seen.insert(v) {
            return Err(Error::Schema(format!("duplicate value '{v}' in domain of {what}")));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Loading

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    KeelArff,
}

impl Format {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &std::path::Path) -> Format {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("arff") | Some("dat") => Format::KeelArff,
            _ => Format::Csv,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Name of the class column. Defaults to the last column.
    pub class_column: Option<String>,
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c == MISSING_CATEGORY
}

pub fn load_dataset<R: Read>(source: R, format: Format, opts: &LoadOptions) -> Result<Dataset> {
    match format {
        Format::Csv => load_csv(source, opts),
        Format::KeelArff => load_arff(source, opts),
    }
}

pub fn load_path(path: &std::path::Path, opts: &LoadOptions) -> Result<Dataset> {
    let f = std::fs::File::open(path)?;
    load_dataset(BufReader::new(f), Format::from_path(path), opts)
}

fn resolve_class_column(names: &[String], opts: &LoadOptions) -> Result<usize> {
    match &opts.class_column {
        None => Ok(names.len() - 1),
        Some(c) => names
            .iter()
            .position(|n| n == c)
            .ok_or_else(|| Error::Schema(format!("class column '{c}' not found"))),
    }
}

/// Maps raw cells to stored values, growing nominal domains on first sight.
struct NominalInterner {
    values: Vec<String>,
    index: HashMap<String, usize>,
}

impl NominalInterner {
    fn new() -> Self {
        NominalInterner { values: Vec::new(), index: HashMap::new() }
    }

    fn intern(&mut self, s: &str) -> usize {
        if let Some(&i) = self.index.get(s) {
            return i;
        }
        let i = self.values.len();
        self.values.push(s.to_string());
        self.index.insert(s.to_string(), i);
        i
    }
}

fn load_csv<R: Read>(source: R, opts: &LoadOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Schema(format!("unreadable header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < 2 || header.iter().any(|h| h.is_empty()) {
        return Err(Error::Schema("header must name at least one attribute and the class".into()));
    }
    check_unique(&header, "header")?;
    let class_col = resolve_class_column(&header, opts)?;

    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != header.len() {
            return Err(Error::Row {
                line,
                message: format!("expected {} cells, found {}", header.len(), rec.len()),
            });
        }
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let attr_cols: Vec<usize> = (0..header.len()).filter(|&c| c != class_col).collect();
    // A column is numeric when every present cell parses as a number.
    let numeric: Vec<bool> = attr_cols
        .iter()
        .map(|&c| rows.iter().all(|(_, r)| is_missing(&r[c]) || r[c].trim().parse::<f64>().is_ok()))
        .collect();

    let mut interners: Vec<NominalInterner> = attr_cols.iter().map(|_| NominalInterner::new()).collect();
    let mut class_interner = NominalInterner::new();
    let mut instances = Vec::with_capacity(rows.len());
    for (_, r) in &rows {
        let mut values = Vec::with_capacity(attr_cols.len());
        for (k, &c) in attr_cols.iter().enumerate() {
            let cell = r[c].trim();
            let v = if numeric[k] {
                if is_missing(cell) {
                    f64::NAN
                } else {
                    cell.parse::<f64>().unwrap_or(f64::NAN)
                }
            } else if is_missing(cell) {
                interners[k].intern(MISSING_CATEGORY) as f64
            } else {
                interners[k].intern(cell) as f64
            };
            values.push(v);
        }
        let cell = r[class_col].trim();
        let label = if is_missing(cell) { None } else { Some(class_interner.intern(cell)) };
        instances.push(Instance::new(values, label));
    }

    let schema = attr_cols
        .iter()
        .zip(numeric.iter().zip(interners))
        .map(|(&c, (&num, interner))| {
            if num {
                Attribute::numeric(header[c].clone())
            } else {
                Attribute::nominal(header[c].clone(), interner.values)
            }
        })
        .collect();
    Dataset::new(schema, header[class_col].clone(), class_interner.values, instances)
}

fn unquote(s: &str) -> String {
    let s = s.trim();
    if s.len() >= 2 && ((s.starts_with('\'') && s.ends_with('\'')) || (s.starts_with('"') && s.ends_with('"'))) {
        s[1..s.len() - 1].to_string()
    } else {
        s.to_string()
    }
}

/// Splits on commas outside single or double quotes.
fn split_fields(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quote: Option<char> = None;
    for ch in line.chars() {
        match (quote, ch) {
            (None, '\'' | '"') => {
                quote = Some(ch);
                cur.push(ch);
            }
            (Some(q), c) if c == q => {
                quote = None;
                cur.push(ch);
            }
            (None, ',') => out.push(unquote(&std::mem::take(&mut cur))),
            _ => cur.push(ch),
        }
    }
    out.push(unquote(&cur));
    out
}

/// Splits `name rest` where the name may be quoted.
fn split_name(s: &str) -> Option<(String, &str)> {
    let s = s.trim_start();
    let first = s.chars().next()?;
    if first == '\'' || first == '"' {
        let end = s[1..].find(first)? + 1;
        Some((s[1..end].to_string(), &s[end + 1..]))
    } else {
        let end = s.find(|c: char| c.is_whitespace() || c == '{').unwrap_or(s.len());
        Some((s[..end].to_string(), &s[end..]))
    }
}

enum DeclaredKind {
    Numeric,
    Nominal(Vec<String>),
}

fn parse_attribute_decl(rest: &str, line: usize) -> Result<(String, DeclaredKind)> {
    let bad = |m: &str| Error::Schema(format!("line {line}: {m}"));
    let (name, ty) = split_name(rest).ok_or_else(|| bad("missing attribute name"))?;
    let ty = ty.trim();
    if let Some(body) = ty.strip_prefix('{') {
        let body = body
            .rfind('}')
            .map(|e| &body[..e])
            .ok_or_else(|| bad("unterminated nominal domain"))?;
        let values: Vec<String> = split_fields(body).into_iter().filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(bad("empty nominal domain"));
        }
        return Ok((name, DeclaredKind::Nominal(values)));
    }
    let word = ty
        .split(|c: char| c.is_whitespace() || c == '[')
        .next()
        .unwrap_or("")
        .to_ascii_lowercase();
    match word.as_str() {
        "numeric" | "real" | "integer" => Ok((name, DeclaredKind::Numeric)),
        "" => Err(bad("missing attribute type")),
        other => Err(bad(&format!("unsupported attribute type '{other}'"))),
    }
}

fn load_arff<R: Read>(source: R, opts: &LoadOptions) -> Result<Dataset> {
    let reader = BufReader::new(source);
    let mut decls: Vec<(String, DeclaredKind)> = Vec::new();
    let mut output_name: Option<String> = None;
    let mut in_data = false;
    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();

    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        if in_data {
            if t.starts_with('{') {
                return Err(Error::Row { line: line_no, message: "sparse rows are not supported".into() });
            }
            rows.push((line_no, split_fields(t)));
            continue;
        }
        if !t.starts_with('@') {
            return Err(Error::Schema(format!("line {line_no}: unexpected content before @data")));
        }
        let (kw, rest) = t.split_at(t.find(char::is_whitespace).unwrap_or(t.len()));
        match kw.to_ascii_lowercase().as_str() {
            "@relation" | "@inputs" | "@input" => {}
            "@outputs" | "@output" => output_name = Some(unquote(rest.trim())),
            "@attribute" => decls.push(parse_attribute_decl(rest, line_no)?),
            "@data" => in_data = true,
            other => return Err(Error::Schema(format!("line {line_no}: unknown directive '{other}'"))),
        }
    }
    if !in_data {
        return Err(Error::Schema("missing @data section".into()));
    }
    if decls.len() < 2 {
        return Err(Error::Schema("need at least one attribute and a class".into()));
    }
    let names: Vec<String> = decls.iter().map(|(n, _)| n.clone()).collect();
    check_unique(&names, "attribute names")?;
    let class_col = match (&opts.class_column, &output_name) {
        (None, Some(o)) => names
            .iter()
            .position(|n| n == o)
            .ok_or_else(|| Error::Schema(format!("@outputs names unknown attribute '{o}'")))?,
        _ => resolve_class_column(&names, opts)?,
    };
    let classes = match &decls[class_col].1 {
        DeclaredKind::Nominal(v) => v.clone(),
        DeclaredKind::Numeric => return Err(Error::Schema("class attribute must be nominal".into())),
    };
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let attr_cols: Vec<usize> = (0..decls.len()).filter(|&c| c != class_col).collect();
    let mut domains: Vec<Vec<String>> = attr_cols
        .iter()
        .map(|&c| match &decls[c].1 {
            DeclaredKind::Nominal(v) => v.clone(),
            DeclaredKind::Numeric => Vec::new(),
        })
        .collect();
    let mut instances = Vec::with_capacity(rows.len());
    for (line, r) in &rows {
        if r.len() != decls.len() {
            return Err(Error::Row {
                line: *line,
                message: format!("expected {} cells, found {}", decls.len(), r.len()),
            });
        }
        let mut values = Vec::with_capacity(attr_cols.len());
        for (k, &c) in attr_cols.iter().enumerate() {
            let cell = r[c].trim();
            let v = match &decls[c].1 {
                DeclaredKind::Numeric => {
                    if is_missing(cell) {
                        f64::NAN
                    } else {
                        cell.parse::<f64>().unwrap_or(f64::NAN)
                    }
                }
                DeclaredKind::Nominal(_) => {
                    let key = if is_missing(cell) { MISSING_CATEGORY } else { cell };
                    match domains[k].iter().position(|d| d == key) {
                        Some(i) => i as f64,
                        None if key == MISSING_CATEGORY => {
                            domains[k].push(MISSING_CATEGORY.to_string());
                            (domains[k].len() - 1) as f64
                        }
                        None => {
                            return Err(Error::Row {
                                line: *line,
                                message: format!("value '{cell}' not in the domain of '{}'", decls[c].0),
                            })
                        }
                    }
                }
            };
            values.push(v);
        }
        let cell = r[class_col].trim();
        let label = if is_missing(cell) {
            None
        } else {
            Some(classes.iter().position(|y| y == cell).ok_or_else(|| Error::Row {
                line: *line,
                message: format!("unknown class '{cell}'"),
            })?)
        };
        instances.push(Instance::new(values, label));
    }
    let schema = attr_cols
        .iter()
        .zip(domains)
        .map(|(&c, dom)| match &decls[c].1 {
            DeclaredKind::Numeric => Attribute::numeric(decls[c].0.clone()),
            DeclaredKind::Nominal(_) => Attribute::nominal(decls[c].0.clone(), dom),
        })
        .collect();
    Dataset::new(schema, decls[class_col].0.clone(), classes, instances)
}

/// Reads CSV rows into value vectors for a fixed schema, matching columns by
/// header name. Extra columns are ignored; empty cells, `?` and nominal values
/// outside the domain become missing.
pub fn encode_csv_rows<R: Read>(schema: &[Attribute], source: R) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let header = reader.headers()?.clone();
    let columns: Vec<usize> = schema
        .iter()
        .map(|a| {
            header
                .iter()
                .position(|h| h == a.name)
                .ok_or_else(|| Error::Schema(format!("column '{}' not found", a.name)))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let values = schema
            .iter()
            .zip(&columns)
            .map(|(a, &c)| {
                let cell = record.get(c).unwrap_or("");
                if cell.is_empty() || cell == MISSING_CATEGORY {
                    return Ok(f64::NAN);
                }
                match &a.kind {
                    AttributeKind::Numeric { .. } => cell.parse::<f64>().map_err(|_| Error::Row {
                        line: line + 2,
                        message: format!("'{cell}' is not numeric for '{}'", a.name),
                    }),
                    AttributeKind::Nominal { values } => {
                        Ok(values.iter().position(|v| v == cell).map_or(f64::NAN, |i| i as f64))
                    }
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Preprocessing

/// Min-max scaling fitted on one dataset and applicable to others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    ranges: Vec<Option<(f64, f64)>>,
}

impl Normalizer {
    pub fn fit(d: &Dataset) -> Normalizer {
        Normalizer {
            ranges: d
                .schema
                .iter()
                .map(|a| match a.kind {
                    AttributeKind::Numeric { min, max } => Some((min, max)),
                    AttributeKind::Nominal { .. } => None,
                })
                .collect(),
        }
    }

    pub fn scale(&self, values: &mut [f64]) {
        for (v, r) in values.iter_mut().zip(&self.ranges) {
            if let (Some((lo, hi)), false) = (r, v.is_nan()) {
                *v = if hi > lo { (*v - lo) / (hi - lo) } else { 0.0 };
            }
        }
    }

    pub fn apply(&self, d: &Dataset) -> Dataset {
        let mut out = d.clone();
        for x in &mut out.instances {
            self.scale(&mut x.values);
        }
        out.refresh_ranges();
        out
    }
}

/// Min-max scales every numeric attribute to [0, 1] using the dataset's own
/// range. Constant attributes map to 0.
pub fn normalize_numeric(d: &Dataset) -> Dataset {
    Normalizer::fit(d).apply(d)
}

/// Replaces missing numeric values with the mean observed in the fitting data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imputer {
    means: Vec<Option<f64>>,
}

impl Imputer {
    pub fn fit(d: &Dataset) -> Imputer {
        let means = d
            .schema
            .iter()
            .enumerate()
            .map(|(t, a)| {
                a.is_numeric().then(|| {
                    let (s, n) = d
                        .instances
                        .iter()
                        .map(|x| x.values[t])
                        .filter(|v| !v.is_nan())
                        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
                    if n == 0 {
                        0.0
                    } else {
                        s / n as f64
                    }
                })
            })
            .collect();
        Imputer { means }
    }

    pub fn fill(&self, values: &mut [f64]) {
        for (v, m) in values.iter_mut().zip(&self.means) {
            if let (Some(m), true) = (m, v.is_nan()) {
                *v = *m;
            }
        }
    }

    pub fn apply(&self, d: &Dataset) -> Dataset {
        let mut out = d.clone();
        for x in &mut out.instances {
            self.fill(&mut x.values);
        }
        out.refresh_ranges();
        out
    }
}

// ---------------------------------------------------------------------------
// Partitions

#[derive(Debug, Clone)]
pub struct SemiSupervisedSplit {
    pub labeled: Dataset,
    /// Labels erased. Ground truth is kept in `unlabeled_truth`.
    pub unlabeled: Dataset,
    pub test: Dataset,
    pub ratio: f64,
    /// Hidden labels of `unlabeled`, for transductive scoring only.
    pub unlabeled_truth: Vec<usize>,
    /// Source indices of each part.
    pub labeled_ids: Vec<usize>,
    pub unlabeled_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
    pub warnings: Vec<String>,
}

fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Assigns each instance to one of `k` buckets, class by class, after a seeded
/// shuffle, so every bucket gets a near-proportional share of each class.
fn stratified_buckets(labels: &[usize], num_classes: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let mut buckets = vec![Vec::new(); k];
    let mut next = 0;
    for members in &mut by_class {
        members.shuffle(rng);
        for &i in members.iter() {
            buckets[next % k].push(i);
            next += 1;
        }
    }
    for b in &mut buckets {
        b.sort_unstable();
    }
    buckets
}

/// Per-class target counts for a stratified subset of size `total` drawn from
/// `pool`, using largest remainders. Every class present in the pool gets at
/// least one slot.
fn stratified_quota(
    pool: &[usize],
    labels: &[usize],
    num_classes: usize,
    total: usize,
    warnings: &mut Vec<String>,
    classes: &[String],
) -> Vec<usize> {
    let mut counts = vec![0usize; num_classes];
    for &i in pool {
        counts[labels[i]] += 1;
    }
    let n = pool.len().max(1) as f64;
    let exact: Vec<f64> = counts.iter().map(|&c| total as f64 * c as f64 / n).collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut rest = total.saturating_sub(quota.iter().sum());
    let mut order: Vec<usize> = (0..num_classes).collect();
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .partial_cmp(&(exact[a] - exact[a].floor()))
            .unwrap()
            .then(a.cmp(&b))
    });
    for &y in &order {
        if rest == 0 {
            break;
        }
        if quota[y] < counts[y] {
            quota[y] += 1;
            rest -= 1;
        }
    }
    for y in 0..num_classes {
        if counts[y] > 0 && quota[y] == 0 {
            warnings.push(format!(
                "class '{}' would receive no labeled instance; one is enforced",
                classes[y]
            ));
            quota[y] = 1;
        }
    }
    quota
}

/// Picks a stratified subset of `pool` following `quota`, taking members in
/// shuffled order. Returns (chosen, rest), both sorted.
fn take_quota(pool: &[usize], labels: &[usize], quota: &[usize], rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut shuffled = pool.to_vec();
    shuffled.shuffle(rng);
    let mut used = vec![0usize; quota.len()];
    let (mut chosen, mut rest) = (Vec::new(), Vec::new());
    for i in shuffled {
        let y = labels[i];
        if used[y] < quota[y] {
            used[y] += 1;
            chosen.push(i);
        } else {
            rest.push(i);
        }
    }
    chosen.sort_unstable();
    rest.sort_unstable();
    (chosen, rest)
}

fn assemble(
    d: &Dataset,
    labels: &[usize],
    labeled: Vec<usize>,
    unlabeled: Vec<usize>,
    test: Vec<usize>,
    ratio: f64,
    warnings: Vec<String>,
) -> SemiSupervisedSplit {
    for w in &warnings {
        warn!("{w}");
    }
    SemiSupervisedSplit {
        labeled: d.subset(&labeled),
        unlabeled: d.subset(&unlabeled).without_labels(),
        test: d.subset(&test),
        ratio,
        unlabeled_truth: unlabeled.iter().map(|&i| labels[i]).collect(),
        labeled_ids: labeled,
        unlabeled_ids: unlabeled,
        test_ids: test,
        warnings,
    }
}

/// One cross-validation partition: fold `fold` of `folds` is the test set and
/// a stratified `ratio` of the remaining training instances keeps its labels.
pub fn make_split(d: &Dataset, ratio: f64, fold: usize, folds: usize, seed: u64) -> Result<SemiSupervisedSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return param(format!("ratio must lie in (0,1), got {ratio}"));
    }
    if folds < 2 || fold >= folds {
        return param(format!("fold {fold} invalid for {folds} folds"));
    }
    let labels = d.labels()?;
    if d.len() < folds {
        return param(format!("{} instances cannot fill {folds} folds", d.len()));
    }
    let mut rng = seeded(seed, 0);
    let buckets = stratified_buckets(&labels, d.num_classes(), folds, &mut rng);
    let test = buckets[fold].clone();
    let mut train: Vec<usize> = buckets
        .iter()
        .enumerate()
        .filter(|&(f, _)| f != fold)
        .flat_map(|(_, b)| b.iter().copied())
        .collect();
    train.sort_unstable();

    let mut warnings = Vec::new();
    let total = (ratio * train.len() as f64).round() as usize;
    let quota = stratified_quota(&train, &labels, d.num_classes(), total, &mut warnings, &d.classes);
    let mut rng = seeded(seed, 1 + fold as u64);
    let (labeled, unlabeled) = take_quota(&train, &labels, &quota, &mut rng);
    Ok(assemble(d, &labels, labeled, unlabeled, test, ratio, warnings))
}

/// Grid-study partition: 20% test, and two disjoint 40% pools. The labeled
/// part is a stratified `labeled_frac` of the first pool; the unlabeled part a
/// class-blind `unlabeled_frac` of the second. Smaller fractions yield subsets
/// of larger ones for the same seed.
pub fn make_grid_split(d: &Dataset, labeled_frac: f64, unlabeled_frac: f64, seed: u64) -> Result<SemiSupervisedSplit> {
    if !(labeled_frac > 0.0 && labeled_frac <= 1.0) {
        return param(format!("labeled fraction must lie in (0,1], got {labeled_frac}"));
    }
    if !(0.0..=1.0).contains(&unlabeled_frac) {
        return param(format!("unlabeled fraction must lie in [0,1], got {unlabeled_frac}"));
    }
    let labels = d.labels()?;
    if d.len() < 5 {
        return param("grid split needs at least 5 instances");
    }
    let mut rng = seeded(seed, 0);
    let buckets = stratified_buckets(&labels, d.num_classes(), 5, &mut rng);
    let test = buckets[0].clone();
    let mut pool1: Vec<usize> = buckets[1].iter().chain(&buckets[2]).copied().collect();
    let mut pool2: Vec<usize> = buckets[3].iter().chain(&buckets[4]).copied().collect();
    pool1.sort_unstable();
    pool2.sort_unstable();

    let mut warnings = Vec::new();
    // Stratified prefix of a fixed per-class shuffle keeps subsets nested.
    let total = (labeled_frac * pool1.len() as f64).round() as usize;
    let quota = stratified_quota(&pool1, &labels, d.num_classes(), total, &mut warnings, &d.classes);
    let mut rng = seeded(seed, 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); d.num_classes()];
    for &i in &pool1 {
        by_class[labels[i]].push(i);
    }
    let mut labeled: Vec<usize> = Vec::new();
    for (y, members) in by_class.iter_mut().enumerate() {
        members.shuffle(&mut rng);
        labeled.extend(members.iter().take(quota[y]));
    }
    labeled.sort_unstable();

    let mut rng = seeded(seed, 2);
    let mut shuffled = pool2.clone();
    shuffled.shuffle(&mut rng);
    let take = (unlabeled_frac * pool2.len() as f64).round() as usize;
    let mut unlabeled: Vec<usize> = shuffled.into_iter().take(take).collect();
    unlabeled.sort_unstable();
    Ok(assemble(d, &labels, labeled, unlabeled, test, labeled_frac, warnings))
}
