//! Unit-by-column tables with column roles, CSV ingestion and PU engineering.

mod pu;
mod roles;
mod standardize;

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use pu::{engineer_pu, validate_pu_assumptions, AssumptionReport, Check, PuDataset, ScarStatus};
pub use roles::{ColumnRole, RoleMap, RoleSet};
pub use standardize::{standardize, FeatureScaling, StandardizationParams};

/// A named numeric column with its roles.
#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: String,
    pub roles: RoleSet,
    pub values: Vec<f64>,
}

impl Column {
    pub fn new(name: impl Into<String>, roles: RoleSet, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            roles,
            values,
        }
    }
}

/// Which feature columns a learner sees: the adjustment set Z or the full
/// feature set X.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureSet {
    #[serde(rename = "z", alias = "Z")]
    Adjustment,
    #[serde(rename = "x", alias = "X")]
    Full,
}

impl FeatureSet {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::Adjustment => "Z",
            FeatureSet::Full => "X",
        }
    }
}

impl std::str::FromStr for FeatureSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "z" | "adjustment" => Ok(FeatureSet::Adjustment),
            "x" | "full" | "features" => Ok(FeatureSet::Full),
            other => Err(Error::Config(format!("unknown feature set `{other}` (expected z or x)"))),
        }
    }
}

/// Metadata sidecar written next to every dataset CSV.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub roles: RoleMap,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scar_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hide_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl DatasetMeta {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// `data.csv` -> `data.meta.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    ids: Vec<String>,
    id_column: Option<String>,
    columns: Vec<Column>,
}

impl Dataset {
    /// Builds a dataset and checks lengths, role cardinalities and binary
    /// domains. `ids` defaults to row indices.
    pub fn new(columns: Vec<Column>, ids: Option<(String, Vec<String>)>) -> Result<Self> {
        let n = columns.first().map(|c| c.values.len()).unwrap_or(0);
        for c in &columns {
            if c.values.len() != n {
                return Err(Error::Config(format!(
                    "column `{}` has {} values, expected {n}",
                    c.name,
                    c.values.len()
                )));
            }
        }
        let (id_column, ids) = match ids {
            Some((name, ids)) => {
                if ids.len() != n {
                    return Err(Error::Config(format!("id column has {} values, expected {n}", ids.len())));
                }
                (Some(name), ids)
            }
            None => (None, (0..n).map(|i| i.to_string()).collect()),
        };
        let d = Self {
            ids,
            id_column,
            columns,
        };
        d.role_map().validate()?;
        for c in d.columns.iter().filter(|c| c.roles.is_binary()) {
            if let Some(row) = c.values.iter().position(|v| *v != 0.0 && *v != 1.0) {
                return Err(Error::Domain(format!(
                    "column `{}` must be 0/1, found {} at row {}",
                    c.name,
                    c.values[row],
                    row + 1
                )));
            }
        }
        for c in &d.columns {
            if let Some(row) = c.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::MissingValues { rows: vec![row + 1] });
            }
        }
        Ok(d)
    }

    pub fn n_units(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id_column(&self) -> Option<&str> {
        self.id_column.as_deref()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn values(&self, name: &str) -> Result<&[f64]> {
        self.column(name)
            .map(|c| c.values.as_slice())
            .ok_or_else(|| Error::Config(format!("no column `{name}`")))
    }

    fn with_role(&self, role: ColumnRole) -> Option<&Column> {
        self.columns.iter().find(|c| c.roles.contains(role))
    }

    pub fn treatment_name(&self) -> Option<&str> {
        self.with_role(ColumnRole::Treatment).map(|c| c.name.as_str())
    }

    pub fn outcome_name(&self) -> &str {
        // validated on construction
        &self.with_role(ColumnRole::Outcome).expect("outcome column").name
    }

    pub fn label_name(&self) -> Option<&str> {
        self.with_role(ColumnRole::LabelIndicator).map(|c| c.name.as_str())
    }

    /// Treatment as 0/1 labels, when the dataset carries one.
    pub fn treatment(&self) -> Option<Vec<u8>> {
        self.with_role(ColumnRole::Treatment).map(|c| to_binary(&c.values))
    }

    pub fn label_indicator(&self) -> Option<Vec<u8>> {
        self.with_role(ColumnRole::LabelIndicator).map(|c| to_binary(&c.values))
    }

    pub fn outcome(&self) -> &[f64] {
        &self.with_role(ColumnRole::Outcome).expect("outcome column").values
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.names_with(ColumnRole::Feature)
    }

    pub fn adjustment_names(&self) -> Vec<&str> {
        self.names_with(ColumnRole::Adjustment)
    }

    pub fn names_for(&self, set: FeatureSet) -> Vec<&str> {
        match set {
            FeatureSet::Adjustment => self.adjustment_names(),
            FeatureSet::Full => self.feature_names(),
        }
    }

    fn names_with(&self, role: ColumnRole) -> Vec<&str> {
        self.columns
            .iter()
            .filter(|c| c.roles.contains(role))
            .map(|c| c.name.as_str())
            .collect()
    }

    /// Units-by-columns matrix of the named columns, in the given order.
    pub fn matrix(&self, names: &[&str]) -> Result<DMatrix<f64>> {
        let cols = names
            .iter()
            .map(|n| self.values(n))
            .collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_fn(self.n_units(), names.len(), |i, j| cols[j][i]))
    }

    pub fn role_map(&self) -> RoleMap {
        let mut map = RoleMap::new();
        for c in &self.columns {
            map.insert(c.name.clone(), c.roles.clone());
        }
        if let Some(id) = &self.id_column {
            map.insert(id.clone(), RoleSet::of(&[ColumnRole::UnitId]));
        }
        map
    }

    /// Rows at `rows`, in that order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            id_column: self.id_column.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| Column::new(c.name.clone(), c.roles.clone(), rows.iter().map(|&i| c.values[i]).collect()))
                .collect(),
        }
    }

    pub fn with_column(&self, column: Column) -> Result<Dataset> {
        let mut columns: Vec<Column> = self.columns.iter().filter(|c| c.name != column.name).cloned().collect();
        columns.push(column);
        let ids = self.id_column.clone().map(|n| (n, self.ids.clone()));
        Dataset::new(columns, ids)
    }

    pub fn without_column(&self, name: &str) -> Result<Dataset> {
        let columns = self.columns.iter().filter(|c| c.name != name).cloned().collect();
        let ids = self.id_column.clone().map(|n| (n, self.ids.clone()));
        Dataset::new(columns, ids)
    }

    pub(crate) fn columns_mut(&mut self) -> &mut [Column] {
        &mut self.columns
    }

    /// Writes the table as CSV: id column first (when present), then columns
    /// in dataset order. Floats use the shortest round-trip representation.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = Vec::new();
        if let Some(id) = &self.id_column {
            header.push(id);
        }
        header.extend(self.columns.iter().map(|c| c.name.as_str()));
        w.write_record(&header)?;
        let mut record: Vec<String> = Vec::with_capacity(header.len());
        for i in 0..self.n_units() {
            record.clear();
            if self.id_column.is_some() {
                record.push(self.ids[i].clone());
            }
            record.extend(self.columns.iter().map(|c| format!("{}", c.values[i])));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            roles: self.role_map(),
            unit_id: self.id_column.clone(),
            ..DatasetMeta::default()
        }
    }

    /// Writes `path` and its `.meta.json` sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)?;
        self.meta().save(&sidecar_path(path))
    }

    /// Loads `path` using its `.meta.json` sidecar for roles.
    pub fn open(path: &Path) -> Result<Dataset> {
        let meta = DatasetMeta::load(&sidecar_path(path))?;
        load_csv(path, &meta.roles)
    }
}

pub(crate) fn to_binary(values: &[f64]) -> Vec<u8> {
    values.iter().map(|v| u8::from(*v == 1.0)).collect()
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c.eq_ignore_ascii_case("na") || c.eq_ignore_ascii_case("nan") || c.eq_ignore_ascii_case("null")
}

/// Reads a CSV file, keeping only the columns named in `roles`.
pub fn load_csv(path: &Path, roles: &RoleMap) -> Result<Dataset> {
    read_csv(std::fs::File::open(path)?, roles)
}

/// Reads CSV from any reader. Data rows are numbered from 1 in errors.
pub fn read_csv<R: Read>(reader: R, roles: &RoleMap) -> Result<Dataset> {
    roles.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut positions = Vec::new();
    for (name, set) in roles.iter() {
        let pos = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("role map names column `{name}` which is not in the header")))?;
        positions.push((name.to_string(), set.clone(), pos));
    }
    // keep header order
    positions.sort_by_key(|(_, _, p)| *p);

    let mut ids: Option<(String, Vec<String>)> = None;
    let mut columns: Vec<Column> = Vec::new();
    for (name, set, _) in &positions {
        if set.contains(ColumnRole::UnitId) {
            ids = Some((name.clone(), Vec::new()));
        } else {
            columns.push(Column::new(name.clone(), set.clone(), Vec::new()));
        }
    }

    let mut missing_rows = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let mut parsed: Vec<f64> = Vec::with_capacity(columns.len());
        let mut id_value = None;
        let mut missing = false;
        for (name, set, pos) in &positions {
            let cell = record.get(*pos).unwrap_or("");
            if set.contains(ColumnRole::UnitId) {
                if cell.trim().is_empty() {
                    missing = true;
                }
                id_value = Some(cell.trim().to_string());
                continue;
            }
            if is_missing(cell) {
                missing = true;
                parsed.push(f64::NAN);
                continue;
            }
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row,
                column: name.clone(),
                message: format!("`{cell}` is not a number"),
            })?;
            if set.is_binary() && v != 0.0 && v != 1.0 {
                return Err(Error::Domain(format!(
                    "row {row}: column `{name}` must be 0 or 1, found {cell}"
                )));
            }
            parsed.push(v);
        }
        if missing {
            missing_rows.push(row);
            continue;
        }
        for (c, v) in columns.iter_mut().zip(parsed) {
            c.values.push(v);
        }
        if let (Some((_, ids)), Some(id)) = (ids.as_mut(), id_value) {
            ids.push(id);
        }
    }
    if !missing_rows.is_empty() {
        return Err(Error::MissingValues { rows: missing_rows });
    }
    Dataset::new(columns, ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roles() -> RoleMap {
        RoleMap::new()
            .with("x1", &[ColumnRole::Feature])
            .with("z1", &[ColumnRole::Adjustment])
            .with("t", &[ColumnRole::Treatment])
            .with("y", &[ColumnRole::Outcome])
    }

    #[test]
    fn ingests_three_rows_with_roles() {
        let csv = "x1,z1,t,y\n0.5,1,1,2.0\n1.5,2,0,3.0\n-1,3,1,4.5\n";
        let d = read_csv(csv.as_bytes(), &roles()).unwrap();
        assert_eq!(d.n_units(), 3);
        assert_eq!(d.feature_names(), vec!["x1", "z1"]);
        assert_eq!(d.adjustment_names(), vec!["z1"]);
        assert_eq!(d.treatment().unwrap(), vec![1, 0, 1]);
        assert_eq!(d.outcome(), &[2.0, 3.0, 4.5]);
    }

    #[test]
    fn role_map_without_treatment_is_config_error() {
        let map = RoleMap::new().with("x1", &[ColumnRole::Feature]).with("y", &[ColumnRole::Outcome]);
        let err = read_csv("x1,y\n1,2\n".as_bytes(), &map).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn role_map_naming_absent_column_is_config_error() {
        let map = roles().with("w", &[ColumnRole::Feature]);
        let err = read_csv("x1,z1,t,y\n1,1,1,1\n".as_bytes(), &map).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn non_binary_treatment_cites_row() {
        let csv = "x1,z1,t,y\n1,1,0,1\n1,1,1,1\n1,1,0,1\n1,1,1,1\n1,1,2,1\n";
        match read_csv(csv.as_bytes(), &roles()) {
            Err(Error::Domain(msg)) => assert!(msg.contains("row 5"), "{msg}"),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_feature_reports_row_and_column() {
        let csv = "x1,z1,t,y\n1,1,0,1\nabc,1,1,1\n";
        match read_csv(csv.as_bytes(), &roles()) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "x1");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_values_are_listed_by_row() {
        let csv = "x1,z1,t,y\n1,,0,1\n1,1,1,1\n1,1,0,NA\n";
        match read_csv(csv.as_bytes(), &roles()) {
            Err(Error::MissingValues { rows }) => assert_eq!(rows, vec![1, 3]),
            other => panic!("expected missing-value error, got {other:?}"),
        }
    }

    #[test]
    fn unmapped_columns_are_ignored() {
        let csv = "note,x1,z1,t,y\nhello,1,1,0,1\n,2,1,1,1\n";
        let d = read_csv(csv.as_bytes(), &roles()).unwrap();
        assert_eq!(d.n_units(), 2);
        assert!(d.column("note").is_none());
    }

    #[test]
    fn unit_id_column_supplies_ids() {
        let map = roles().with("id", &[ColumnRole::UnitId]);
        let d = read_csv("id,x1,z1,t,y\nA,1,1,0,1\nB,2,1,1,1\n".as_bytes(), &map).unwrap();
        assert_eq!(d.ids(), &["A".to_string(), "B".to_string()]);
    }

    #[test]
    fn write_then_read_preserves_values_and_roles() {
        let map = roles().with("id", &[ColumnRole::UnitId]);
        let d = read_csv("id,x1,z1,t,y\nA,0.1,1e-3,0,1\nB,2,1,1,-7.25\n".as_bytes(), &map).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &d.role_map()).unwrap();
        assert_eq!(back, d);
        let json = serde_json::to_string(&d.meta()).unwrap();
        let meta: DatasetMeta = serde_json::from_str(&json).unwrap();
        assert_eq!(meta.roles, d.role_map());
    }
}
