//! Dataset naming: `UHV-OTS-{kind}-{locale}-{domain}[-{projectname}]-{releasedate}`.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::CorpusError;

const PREFIX: &str = "UHV-OTS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetKind {
    Commercial,
    Research,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetName {
    pub kind: DatasetKind,
    pub locale: String,
    pub domain: String,
    /// Required for commercial datasets, absent for research ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projectname: Option<String>,
    /// `YYYYMMDD`.
    pub releasedate: String,
}

fn check_segment(field: &'static str, value: &str) -> Result<(), CorpusError> {
    if value.is_empty() {
        return Err(CorpusError::EmptySegment(field));
    }
    if value.contains('-') {
        return Err(CorpusError::InvalidSegment {
            field,
            value: value.to_string(),
        });
    }
    Ok(())
}

fn check_date(value: &str) -> Result<(), CorpusError> {
    let ok = value.len() == 8
        && value.bytes().all(|b| b.is_ascii_digit())
        && NaiveDate::parse_from_str(value, "%Y%m%d").is_ok();
    if ok {
        Ok(())
    } else {
        Err(CorpusError::InvalidDate(value.to_string()))
    }
}

impl DatasetName {
    pub fn commercial(locale: &str, domain: &str, projectname: &str, releasedate: &str) -> Self {
        DatasetName {
            kind: DatasetKind::Commercial,
            locale: locale.into(),
            domain: domain.into(),
            projectname: Some(projectname.into()),
            releasedate: releasedate.into(),
        }
    }

    pub fn research(locale: &str, domain: &str, releasedate: &str) -> Self {
        DatasetName {
            kind: DatasetKind::Research,
            locale: locale.into(),
            domain: domain.into(),
            projectname: None,
            releasedate: releasedate.into(),
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        check_segment("locale", &self.locale)?;
        check_segment("domain", &self.domain)?;
        match (self.kind, &self.projectname) {
            (DatasetKind::Commercial, Some(p)) => check_segment("projectname", p)?,
            (DatasetKind::Commercial, None) => {
                return Err(CorpusError::EmptySegment("projectname"))
            }
            (DatasetKind::Research, Some(_)) => {
                return Err(CorpusError::InvalidSegment {
                    field: "projectname",
                    value: "research datasets carry no project name".into(),
                })
            }
            (DatasetKind::Research, None) => {}
        }
        if self.releasedate.is_empty() {
            return Err(CorpusError::EmptySegment("releasedate"));
        }
        check_date(&self.releasedate)
    }

    pub fn render(&self) -> Result<String, CorpusError> {
        self.validate()?;
        let kind = match self.kind {
            DatasetKind::Commercial => "Commercial",
            DatasetKind::Research => "Research",
        };
        let mut out = format!("{PREFIX}-{kind}-{}-{}", self.locale, self.domain);
        if let Some(p) = &self.projectname {
            out.push('-');
            out.push_str(p);
        }
        out.push('-');
        out.push_str(&self.releasedate);
        Ok(out)
    }
}

/// Renders a dataset name, validating every segment.
pub fn render_name(name: &DatasetName) -> Result<String, CorpusError> {
    name.render()
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.render() {
            Ok(s) => f.write_str(&s),
            Err(_) => write!(f, "<invalid dataset name>"),
        }
    }
}

impl FromStr for DatasetName {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CorpusError::InvalidName(s.to_string());
        let rest = s.strip_prefix("UHV-OTS-").ok_or_else(bad)?;
        let parts: Vec<&str> = rest.split('-').collect();
        let name = match parts.as_slice() {
            ["Commercial", locale, domain, project, date] => {
                DatasetName::commercial(locale, domain, project, date)
            }
            ["Research", locale, domain, date] => DatasetName::research(locale, domain, date),
            _ => return Err(bad()),
        };
        name.validate()?;
        Ok(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn commercial_pattern() {
        let n = DatasetName::commercial("enus", "general", "lighthouse", "20211001");
        assert_eq!(
            render_name(&n).unwrap(),
            "UHV-OTS-Commercial-enus-general-lighthouse-20211001"
        );
    }

    #[test]
    fn research_pattern() {
        let n = DatasetName::research("enus", "sports", "20211201");
        assert_eq!(
            render_name(&n).unwrap(),
            "UHV-OTS-Research-enus-sports-20211201"
        );
    }

    #[test]
    fn empty_project_rejected() {
        let n = DatasetName::commercial("enus", "general", "", "20211001");
        assert!(matches!(
            render_name(&n),
            Err(CorpusError::EmptySegment("projectname"))
        ));
    }

    #[test]
    fn bad_dates_rejected() {
        for d in ["2021XXXX", "20210230", "2021101", "202110011"] {
            let n = DatasetName::research("enus", "sports", d);
            assert!(
                matches!(render_name(&n), Err(CorpusError::InvalidDate(_))),
                "{d}"
            );
        }
    }

    #[test]
    fn hyphen_in_segment_rejected() {
        let n = DatasetName::research("en-us", "sports", "20211201");
        assert!(matches!(
            render_name(&n),
            Err(CorpusError::InvalidSegment { .. })
        ));
    }

    fn segment() -> impl Strategy<Value = String> {
        "[a-z0-9_]{1,12}"
    }

    proptest! {
        #[test]
        fn render_then_parse_is_identity(
            commercial in any::<bool>(),
            locale in segment(),
            domain in segment(),
            project in segment(),
            days in 0i64..20000,
        ) {
            let date = (NaiveDate::from_ymd_opt(1990, 1, 1).unwrap() + chrono::Duration::days(days))
                .format("%Y%m%d")
                .to_string();
            let name = if commercial {
                DatasetName::commercial(&locale, &domain, &project, &date)
            } else {
                DatasetName::research(&locale, &domain, &date)
            };
            let rendered = render_name(&name).unwrap();
            let parsed: DatasetName = rendered.parse().unwrap();
            prop_assert_eq!(parsed, name);
        }
    }
}
