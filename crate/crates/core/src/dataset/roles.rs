use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Role a column plays. A column may carry several roles (the outcome can
/// also be a PU feature), and `Adjustment` always implies `Feature`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    Feature,
    Adjustment,
    Treatment,
    Outcome,
    LabelIndicator,
    UnitId,
}

impl ColumnRole {
    pub fn as_str(self) -> &'static str {
        match self {
            ColumnRole::Feature => "feature",
            ColumnRole::Adjustment => "adjustment",
            ColumnRole::Treatment => "treatment",
            ColumnRole::Outcome => "outcome",
            ColumnRole::LabelIndicator => "label_indicator",
            ColumnRole::UnitId => "unit_id",
        }
    }
}

impl fmt::Display for ColumnRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ColumnRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "feature" | "x" => Ok(ColumnRole::Feature),
            "adjustment" | "z" => Ok(ColumnRole::Adjustment),
            "treatment" | "t" => Ok(ColumnRole::Treatment),
            "outcome" | "y" => Ok(ColumnRole::Outcome),
            "label_indicator" | "label" | "s" => Ok(ColumnRole::LabelIndicator),
            "unit_id" | "id" => Ok(ColumnRole::UnitId),
            other => Err(Error::Config(format!("unknown column role `{other}`"))),
        }
    }
}

/// Set of roles held by one column.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RoleSet(BTreeSet<ColumnRole>);

impl RoleSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn of(roles: &[ColumnRole]) -> Self {
        let mut set = Self::new();
        for r in roles {
            set.insert(*r);
        }
        set
    }

    pub fn insert(&mut self, role: ColumnRole) {
        if role == ColumnRole::Adjustment {
            self.0.insert(ColumnRole::Feature);
        }
        self.0.insert(role);
    }

    pub fn remove(&mut self, role: ColumnRole) {
        self.0.remove(&role);
        if role == ColumnRole::Feature {
            self.0.remove(&ColumnRole::Adjustment);
        }
    }

    pub fn contains(&self, role: ColumnRole) -> bool {
        self.0.contains(&role)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ColumnRole> + '_ {
        self.0.iter().copied()
    }

    /// True for binary columns (treatment, label indicator).
    pub fn is_binary(&self) -> bool {
        self.contains(ColumnRole::Treatment) || self.contains(ColumnRole::LabelIndicator)
    }

    /// A feature that carries no treatment, outcome or label role.
    pub fn is_plain_feature(&self) -> bool {
        self.contains(ColumnRole::Feature)
            && !self.contains(ColumnRole::Treatment)
            && !self.contains(ColumnRole::Outcome)
            && !self.contains(ColumnRole::LabelIndicator)
    }
}

impl Serialize for RoleSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.len() == 1 {
            self.0.iter().next().unwrap().serialize(serializer)
        } else {
            // `adjustment` implies `feature`; keep the sidecar terse.
            let roles: Vec<ColumnRole> = self
                .iter()
                .filter(|r| !(*r == ColumnRole::Feature && self.contains(ColumnRole::Adjustment)))
                .collect();
            if roles.len() == 1 {
                roles[0].serialize(serializer)
            } else {
                roles.serialize(serializer)
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RoleSpec {
    One(String),
    Many(Vec<String>),
}

impl<'de> Deserialize<'de> for RoleSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let names = match RoleSpec::deserialize(deserializer)? {
            RoleSpec::One(s) => s.split(['+', ',']).map(str::to_string).collect(),
            RoleSpec::Many(v) => v,
        };
        let mut set = RoleSet::new();
        for name in names {
            set.insert(name.parse().map_err(serde::de::Error::custom)?);
        }
        Ok(set)
    }
}

/// Column name to roles. Columns absent from the map are ignored on ingestion.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoleMap(BTreeMap<String, RoleSet>);

impl RoleMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, column: &str, roles: &[ColumnRole]) -> Self {
        self.0.insert(column.to_string(), RoleSet::of(roles));
        self
    }

    pub fn insert(&mut self, column: impl Into<String>, roles: RoleSet) {
        self.0.insert(column.into(), roles);
    }

    pub fn get(&self, column: &str) -> Option<&RoleSet> {
        self.0.get(column)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &RoleSet)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Parses a TOML role file: `column = "role"` or `column = ["outcome", "feature"]`.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let map: RoleMap = toml::from_str(s)?;
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Ok(serde_json::from_str(&text)?),
            _ => Self::from_toml_str(&text),
        }
    }

    pub fn columns_with(&self, role: ColumnRole) -> Vec<&str> {
        self.iter()
            .filter(|(_, r)| r.contains(role))
            .map(|(k, _)| k)
            .collect()
    }

    /// Checks role cardinalities. A treatment column may be absent only when a
    /// label indicator is present (genuine PU data with no known truth).
    pub fn validate(&self) -> Result<()> {
        let count = |role| self.columns_with(role).len();
        let treatments = count(ColumnRole::Treatment);
        let labels = count(ColumnRole::LabelIndicator);
        if labels > 1 {
            return Err(Error::Config("at most one label_indicator column is allowed".into()));
        }
        if treatments > 1 || (treatments == 0 && labels == 0) {
            return Err(Error::Config(format!(
                "exactly one treatment column is required, found {treatments}"
            )));
        }
        let outcomes = count(ColumnRole::Outcome);
        if outcomes != 1 {
            return Err(Error::Config(format!(
                "exactly one outcome column is required, found {outcomes}"
            )));
        }
        if count(ColumnRole::UnitId) > 1 {
            return Err(Error::Config("at most one unit_id column is allowed".into()));
        }
        for (name, roles) in self.iter() {
            if roles.is_empty() {
                return Err(Error::Config(format!("column `{name}` has no role")));
            }
            if roles.contains(ColumnRole::UnitId) && roles.iter().count() > 1 {
                return Err(Error::Config(format!("unit_id column `{name}` cannot carry other roles")));
            }
            if roles.is_binary() && roles.contains(ColumnRole::Feature) {
                return Err(Error::Config(format!(
                    "column `{name}`: treatment and label columns cannot be features"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjustment_implies_feature() {
        let set = RoleSet::of(&[ColumnRole::Adjustment]);
        assert!(set.contains(ColumnRole::Feature));
    }

    #[test]
    fn parses_toml_with_single_and_multiple_roles() {
        let map = RoleMap::from_toml_str(
            "x1 = \"feature\"\nz1 = \"adjustment\"\nt = \"treatment\"\ny = [\"outcome\", \"feature\"]\n",
        )
        .unwrap();
        assert!(map.get("z1").unwrap().contains(ColumnRole::Feature));
        assert!(map.get("y").unwrap().contains(ColumnRole::Outcome));
        assert!(map.get("y").unwrap().contains(ColumnRole::Feature));
        map.validate().unwrap();
    }

    #[test]
    fn missing_treatment_is_a_config_error() {
        let map = RoleMap::new()
            .with("x1", &[ColumnRole::Feature])
            .with("y", &[ColumnRole::Outcome]);
        assert!(matches!(map.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_role_is_rejected() {
        assert!(RoleMap::from_toml_str("x = \"instrument\"").is_err());
    }
}
