use serde::{Deserialize, Serialize};

use super::{Node, NodeKind, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
}

impl Sex {
    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Male => "male",
            Sex::Female => "female",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SexApplicability {
    Male,
    Female,
    #[default]
    Any,
}

impl SexApplicability {
    pub fn as_str(self) -> &'static str {
        match self {
            SexApplicability::Male => "male",
            SexApplicability::Female => "female",
            SexApplicability::Any => "any",
        }
    }

    pub fn applies_to(self, sex: Sex) -> bool {
        matches!(
            (self, sex),
            (SexApplicability::Any, _)
                | (SexApplicability::Male, Sex::Male)
                | (SexApplicability::Female, Sex::Female)
        )
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RangeError {
    #[error("reference range for `{0}` has neither a lower nor an upper bound")]
    Unbounded(String),
    #[error("reference range for `{parameter}` has lower {lower} >= upper {upper}")]
    Inverted { parameter: String, lower: f64, upper: f64 },
    #[error("reference range for `{0}` has age_min > age_max")]
    InvertedAge(String),
    #[error("node `{id}` is not a valid reference range: {reason}")]
    BadNode { id: String, reason: String },
}

/// Interval of values considered normal for a lab parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRange {
    pub parameter: String,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub unit: String,
    #[serde(default)]
    pub sex: SexApplicability,
    pub age_min: Option<f64>,
    pub age_max: Option<f64>,
}

impl ReferenceRange {
    pub fn new(
        parameter: impl Into<String>,
        lower: Option<f64>,
        upper: Option<f64>,
        unit: impl Into<String>,
    ) -> Result<Self, RangeError> {
        let r = ReferenceRange {
            parameter: parameter.into(),
            lower,
            upper,
            unit: unit.into(),
            sex: SexApplicability::Any,
            age_min: None,
            age_max: None,
        };
        r.check()?;
        Ok(r)
    }

    pub fn for_sex(mut self, sex: SexApplicability) -> Self {
        self.sex = sex;
        self
    }

    pub fn for_ages(mut self, min: Option<f64>, max: Option<f64>) -> Result<Self, RangeError> {
        self.age_min = min;
        self.age_max = max;
        self.check()?;
        Ok(self)
    }

    pub fn check(&self) -> Result<(), RangeError> {
        match (self.lower, self.upper) {
            (None, None) => return Err(RangeError::Unbounded(self.parameter.clone())),
            (Some(lower), Some(upper)) if lower >= upper => {
                return Err(RangeError::Inverted {
                    parameter: self.parameter.clone(),
                    lower,
                    upper,
                })
            }
            _ => {}
        }
        if let (Some(a), Some(b)) = (self.age_min, self.age_max) {
            if a > b {
                return Err(RangeError::InvertedAge(self.parameter.clone()));
            }
        }
        Ok(())
    }

    pub fn applies_to(&self, sex: Sex, age: f64) -> bool {
        self.sex.applies_to(sex)
            && self.age_min.is_none_or(|min| age >= min)
            && self.age_max.is_none_or(|max| age <= max)
    }

    pub fn to_node(&self, id: impl Into<String>) -> Node {
        let mut node = Node::new(id, NodeKind::ReferenceRange)
            .with_property("parameter", self.parameter.as_str())
            .with_property("unit", self.unit.as_str())
            .with_property("sex", self.sex.as_str());
        for (key, value) in [
            ("lower", self.lower),
            ("upper", self.upper),
            ("age_min", self.age_min),
            ("age_max", self.age_max),
        ] {
            if let Some(v) = value {
                node = node.with_property(key, v);
            }
        }
        node
    }

    pub fn from_node(node: &Node) -> Result<Self, RangeError> {
        let bad = |reason: &str| RangeError::BadNode {
            id: node.id.clone(),
            reason: reason.to_string(),
        };
        if node.kind != NodeKind::ReferenceRange {
            return Err(bad("kind is not ReferenceRange"));
        }
        let text = |key: &str| node.property(key).and_then(Scalar::as_str);
        let real = |key: &str| -> Result<Option<f64>, RangeError> {
            match node.property(key) {
                None => Ok(None),
                Some(v) => v.as_f64().map(Some).ok_or_else(|| bad(&format!("`{key}` is not numeric"))),
            }
        };
        let sex = match text("sex") {
            None | Some("any") => SexApplicability::Any,
            Some("male") => SexApplicability::Male,
            Some("female") => SexApplicability::Female,
            Some(other) => return Err(bad(&format!("unknown sex `{other}`"))),
        };
        let range = ReferenceRange {
            parameter: text("parameter").ok_or_else(|| bad("missing `parameter`"))?.to_string(),
            lower: real("lower")?,
            upper: real("upper")?,
            unit: text("unit").ok_or_else(|| bad("missing `unit`"))?.to_string(),
            sex,
            age_min: real("age_min")?,
            age_max: real("age_max")?,
        };
        range.check()?;
        Ok(range)
    }
}
