use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Step label: an ISO-8601 calendar date or a plain integer index.
///
/// A stream uses one kind throughout; ordering between the two kinds is not
/// meaningful and ingestion rejects mixed streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Timestamp {
    Index(i64),
    Date(NaiveDate),
}

impl Timestamp {
    pub fn same_kind(&self, other: &Timestamp) -> bool {
        matches!(
            (self, other),
            (Timestamp::Index(_), Timestamp::Index(_)) | (Timestamp::Date(_), Timestamp::Date(_))
        )
    }

    /// The `n`-th successor (next day, or next integer).
    pub fn offset(&self, n: i64) -> Timestamp {
        match self {
            Timestamp::Index(i) => Timestamp::Index(i + n),
            Timestamp::Date(d) => Timestamp::Date(*d + chrono::Duration::days(n)),
        }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Timestamp::Index(i) => write!(f, "{i}"),
            Timestamp::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseTimestampError(pub String);

impl fmt::Display for ParseTimestampError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "'{}' is neither an integer nor an ISO-8601 date", self.0)
    }
}

impl std::error::Error for ParseTimestampError {}

impl FromStr for Timestamp {
    type Err = ParseTimestampError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Ok(i) = s.parse::<i64>() {
            return Ok(Timestamp::Index(i));
        }
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .map(Timestamp::Date)
            .map_err(|_| ParseTimestampError(s.to_string()))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Timestamp::Index(i) => serializer.serialize_i64(*i),
            Timestamp::Date(_) => serializer.collect_str(self),
        }
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Int(i) => Ok(Timestamp::Index(i)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}
