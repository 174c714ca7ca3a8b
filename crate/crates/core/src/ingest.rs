//! Parsing of flight records, the airport registry and dated value series.
//!
//! All readers take delimiter-separated UTF-8 text with a header row. Columns
//! are located by name through a schema so that differently laid-out exports
//! (on-time performance extracts, spot price tables, mobility downloads) can be
//! read without preprocessing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ISO_DATE: &str = "%Y-%m-%d";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("duplicate airport code {0}")]
    DuplicateAirport(AirportCode),
    #[error("line {line}: input is not valid UTF-8")]
    NotUtf8 { line: u64 },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Uppercase IATA-style airport identifier.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AirportCode(String);

impl AirportCode {
    pub fn new(raw: &str) -> Result<Self, String> {
        let code = raw.trim().to_ascii_uppercase();
        if code.is_empty() {
            return Err("empty airport code".into());
        }
        if !code.chars().all(|c| c.is_ascii_alphanumeric()) {
            return Err(format!("invalid airport code `{raw}`"));
        }
        Ok(AirportCode(code))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AirportCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for AirportCode {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        AirportCode::new(&s)
    }
}

impl From<AirportCode> for String {
    fn from(c: AirportCode) -> String {
        c.0
    }
}

/// One departed-and-landed flight leg.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlightRecord {
    pub origin: AirportCode,
    pub destination: AirportCode,
    pub date: NaiveDate,
}

impl FlightRecord {
    pub fn new(origin: &str, destination: &str, date: NaiveDate) -> Result<Self, String> {
        let origin = AirportCode::new(origin)?;
        let destination = AirportCode::new(destination)?;
        if origin == destination {
            return Err(format!("origin equals destination ({origin})"));
        }
        Ok(FlightRecord {
            origin,
            destination,
            date,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coordinates {
    pub latitude: f64,
    pub longitude: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AirportRegistry {
    entries: BTreeMap<AirportCode, Coordinates>,
}

impl AirportRegistry {
    pub fn insert(&mut self, code: AirportCode, at: Coordinates) -> Result<(), IngestError> {
        if self.entries.contains_key(&code) {
            return Err(IngestError::DuplicateAirport(code));
        }
        self.entries.insert(code, at);
        Ok(())
    }

    pub fn contains(&self, code: &AirportCode) -> bool {
        self.entries.contains_key(code)
    }

    pub fn get(&self, code: &AirportCode) -> Option<Coordinates> {
        self.entries.get(code).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesObservation {
    pub date: NaiveDate,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    /// First bad row aborts the parse.
    #[default]
    Strict,
    /// Bad rows are collected and good rows kept.
    Lenient,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

/// Parse result; `rejected` is only ever non-empty in lenient mode.
#[derive(Clone, Debug, PartialEq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub data_rows: usize,
    pub cancelled: usize,
    pub rejected: Vec<RowError>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlightSchema {
    pub origin: String,
    pub destination: String,
    pub date: String,
    /// Rows whose value here is truthy are dropped. Ignored if the header lacks it.
    pub cancelled: Option<String>,
    pub date_format: String,
    pub delimiter: char,
}

impl Default for FlightSchema {
    fn default() -> Self {
        FlightSchema {
            origin: "ORIGIN".into(),
            destination: "DEST".into(),
            date: "FL_DATE".into(),
            cancelled: Some("CANCELLED".into()),
            date_format: ISO_DATE.into(),
            delimiter: ',',
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeriesSchema {
    pub date: String,
    pub value: String,
    pub date_format: String,
    pub delimiter: char,
}

impl Default for SeriesSchema {
    fn default() -> Self {
        SeriesSchema {
            date: "date".into(),
            value: "value".into(),
            date_format: ISO_DATE.into(),
            delimiter: ',',
        }
    }
}

impl SeriesSchema {
    pub fn with_value(mut self, column: &str) -> Self {
        self.value = column.into();
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AirportSchema {
    pub code: String,
    pub latitude: String,
    pub longitude: String,
    pub delimiter: char,
}

impl Default for AirportSchema {
    fn default() -> Self {
        AirportSchema {
            code: "code".into(),
            latitude: "latitude".into(),
            longitude: "longitude".into(),
            delimiter: ',',
        }
    }
}

struct Table<R: Read> {
    reader: csv::Reader<R>,
    header: Vec<String>,
    line: u64,
}

struct Row {
    line: u64,
    fields: Vec<String>,
}

impl<R: Read> Table<R> {
    fn open(source: R, delimiter: char) -> Result<Self, IngestError> {
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter as u8)
            .has_headers(false)
            .flexible(true)
            .from_reader(source);
        let mut first = csv::ByteRecord::new();
        if !reader.read_byte_record(&mut first)? {
            return Err(IngestError::Row {
                line: 1,
                message: "missing header row".into(),
            });
        }
        let header = decode(&first, 1)?
            .into_iter()
            .map(|h| h.trim().trim_start_matches('\u{feff}').to_string())
            .collect();
        Ok(Table {
            reader,
            header,
            line: 1,
        })
    }

    fn column(&self, name: &str) -> Result<usize, IngestError> {
        self.optional_column(name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    }

    fn optional_column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn next_row(&mut self) -> Result<Option<Row>, IngestError> {
        let mut record = csv::ByteRecord::new();
        loop {
            if !self.reader.read_byte_record(&mut record)? {
                return Ok(None);
            }
            let line = record.position().map_or(self.line + 1, |p| p.line());
            self.line = line;
            // Blank trailing lines come back as a single empty field.
            if record.len() == 1 && record.get(0).is_some_and(|f| f.is_empty()) {
                continue;
            }
            return Ok(Some(Row {
                line,
                fields: decode(&record, line)?,
            }));
        }
    }
}

fn decode(record: &csv::ByteRecord, line: u64) -> Result<Vec<String>, IngestError> {
    record
        .iter()
        .map(|f| {
            std::str::from_utf8(f)
                .map(str::to_string)
                .map_err(|_| IngestError::NotUtf8 { line })
        })
        .collect()
}

fn parse_date(raw: &str, format: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(raw.trim(), format)
        .map_err(|e| format!("unparseable date `{raw}` ({e})"))
}

fn truthy(raw: &str) -> bool {
    let v = raw.trim().to_ascii_lowercase();
    match v.as_str() {
        "" | "0" | "false" | "no" | "n" | "f" => false,
        "true" | "yes" | "y" | "t" => true,
        other => other.parse::<f64>().map(|x| x != 0.0).unwrap_or(false),
    }
}

enum RowOutcome<T> {
    Keep(T),
    Cancelled,
}

fn collect_rows<R: Read, T>(
    mut table: Table<R>,
    mode: ParseMode,
    mut each: impl FnMut(&Row) -> Result<RowOutcome<T>, String>,
) -> Result<Parsed<T>, IngestError> {
    let width = table.header.len();
    let mut out = Parsed {
        records: Vec::new(),
        data_rows: 0,
        cancelled: 0,
        rejected: Vec::new(),
    };
    while let Some(row) = table.next_row()? {
        out.data_rows += 1;
        let result = if row.fields.len() != width {
            Err(format!(
                "expected {width} columns, found {}",
                row.fields.len()
            ))
        } else {
            each(&row)
        };
        match result {
            Ok(RowOutcome::Keep(r)) => out.records.push(r),
            Ok(RowOutcome::Cancelled) => out.cancelled += 1,
            Err(message) => match mode {
                ParseMode::Strict => {
                    return Err(IngestError::Row {
                        line: row.line,
                        message,
                    })
                }
                ParseMode::Lenient => out.rejected.push(RowError {
                    line: row.line,
                    message,
                }),
            },
        }
    }
    Ok(out)
}

/// Reads flight legs, dropping cancelled rows when a cancellation column is configured.
pub fn parse_flights<R: Read>(
    source: R,
    schema: &FlightSchema,
    mode: ParseMode,
) -> Result<Parsed<FlightRecord>, IngestError> {
    let table = Table::open(source, schema.delimiter)?;
    let origin = table.column(&schema.origin)?;
    let destination = table.column(&schema.destination)?;
    let date = table.column(&schema.date)?;
    let cancelled = schema
        .cancelled
        .as_deref()
        .and_then(|c| table.optional_column(c));
    collect_rows(table, mode, |row| {
        if let Some(c) = cancelled {
            if truthy(&row.fields[c]) {
                return Ok(RowOutcome::Cancelled);
            }
        }
        let day = parse_date(&row.fields[date], &schema.date_format)?;
        FlightRecord::new(&row.fields[origin], &row.fields[destination], day).map(RowOutcome::Keep)
    })
}

/// Reads one dated numeric column; output is sorted by date and duplicate dates are rejected.
pub fn parse_series<R: Read>(
    source: R,
    schema: &SeriesSchema,
    mode: ParseMode,
) -> Result<Parsed<SeriesObservation>, IngestError> {
    let table = Table::open(source, schema.delimiter)?;
    let date = table.column(&schema.date)?;
    let value = table.column(&schema.value)?;
    let mut parsed = collect_rows(table, mode, |row| {
        let day = parse_date(&row.fields[date], &schema.date_format)?;
        let raw = row.fields[value].trim();
        let v: f64 = raw
            .parse()
            .map_err(|_| format!("non-numeric value `{raw}`"))?;
        if !v.is_finite() {
            return Err(format!("non-finite value `{raw}`"));
        }
        Ok(RowOutcome::Keep((row.line, SeriesObservation { date: day, value: v })))
    })?;

    parsed.records.sort_by_key(|(line, o)| (o.date, *line));
    let mut records: Vec<SeriesObservation> = Vec::with_capacity(parsed.records.len());
    let mut rejected = parsed.rejected;
    for (line, obs) in parsed.records {
        if records.last().is_some_and(|prev| prev.date == obs.date) {
            match mode {
                ParseMode::Strict => return Err(IngestError::DuplicateDate(obs.date)),
                ParseMode::Lenient => rejected.push(RowError {
                    line,
                    message: format!("duplicate date {}", obs.date),
                }),
            }
            continue;
        }
        records.push(obs);
    }
    rejected.sort_by_key(|e| e.line);
    Ok(Parsed {
        records,
        data_rows: parsed.data_rows,
        cancelled: 0,
        rejected,
    })
}

pub fn parse_airports<R: Read>(
    source: R,
    schema: &AirportSchema,
    mode: ParseMode,
) -> Result<(AirportRegistry, Vec<RowError>), IngestError> {
    let table = Table::open(source, schema.delimiter)?;
    let code = table.column(&schema.code)?;
    let lat = table.column(&schema.latitude)?;
    let lon = table.column(&schema.longitude)?;
    let mut seen = BTreeSet::new();
    let parsed = collect_rows(table, mode, |row| {
        let c = AirportCode::new(&row.fields[code])?;
        let number = |i: usize, name: &str, bound: f64| -> Result<f64, String> {
            let raw = row.fields[i].trim();
            let v: f64 = raw
                .parse()
                .map_err(|_| format!("non-numeric {name} `{raw}`"))?;
            if !(-bound..=bound).contains(&v) {
                return Err(format!("{name} {v} outside [-{bound}, {bound}]"));
            }
            Ok(v)
        };
        let at = Coordinates {
            latitude: number(lat, "latitude", 90.0)?,
            longitude: number(lon, "longitude", 180.0)?,
        };
        if !seen.insert(c.clone()) {
            return Err(format!("duplicate airport code {c}"));
        }
        Ok(RowOutcome::Keep((c, at)))
    })?;
    let mut registry = AirportRegistry::default();
    for (c, at) in parsed.records {
        registry.insert(c, at)?;
    }
    Ok((registry, parsed.rejected))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UnresolvedFlight {
    pub index: usize,
    pub flight: FlightRecord,
    pub unknown: Vec<AirportCode>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub unresolved: Vec<UnresolvedFlight>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.unresolved.is_empty()
    }

    /// Distinct unknown codes, sorted.
    pub fn unknown_codes(&self) -> BTreeSet<AirportCode> {
        self.unresolved
            .iter()
            .flat_map(|u| u.unknown.iter().cloned())
            .collect()
    }
}

pub fn validate_airports(flights: &[FlightRecord], registry: &AirportRegistry) -> ValidationReport {
    let unresolved = flights
        .iter()
        .enumerate()
        .filter_map(|(index, f)| {
            let unknown: Vec<AirportCode> = [&f.origin, &f.destination]
                .into_iter()
                .filter(|c| !registry.contains(c))
                .cloned()
                .collect();
            (!unknown.is_empty()).then(|| UnresolvedFlight {
                index,
                flight: f.clone(),
                unknown,
            })
        })
        .collect();
    ValidationReport { unresolved }
}

/// Writes `date,value` rows using the shortest round-trip float representation.
pub fn write_series<W: Write>(sink: W, observations: &[SeriesObservation]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["date", "value"])?;
    for o in observations {
        w.write_record([o.date.format(ISO_DATE).to_string(), o.value.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, ISO_DATE).unwrap()
    }

    fn schema() -> FlightSchema {
        FlightSchema {
            origin: "origin".into(),
            destination: "dest".into(),
            date: "date".into(),
            cancelled: Some("cancelled".into()),
            ..FlightSchema::default()
        }
    }

    #[test]
    fn header_only_gives_no_flights() {
        let p = parse_flights("origin,dest,date\n".as_bytes(), &schema(), ParseMode::Strict).unwrap();
        assert!(p.records.is_empty());
        assert_eq!(p.data_rows, 0);
    }

    #[test]
    fn two_flight_fixture() {
        let src = "origin,dest,date\nJFK,LAX,2020-02-02\nLAX,JFK,2020-02-02\n";
        let p = parse_flights(src.as_bytes(), &schema(), ParseMode::Strict).unwrap();
        assert_eq!(
            p.records,
            vec![
                FlightRecord::new("JFK", "LAX", d("2020-02-02")).unwrap(),
                FlightRecord::new("LAX", "JFK", d("2020-02-02")).unwrap(),
            ]
        );
    }

    #[test]
    fn bad_month_names_line() {
        let src = "origin,dest,date\nJFK,LAX,2020-02-02\nJFK,LAX,2020-13-01\n";
        match parse_flights(src.as_bytes(), &schema(), ParseMode::Strict) {
            Err(IngestError::Row { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected row error, got {other:?}"),
        }
    }

    #[test]
    fn self_loop_and_column_count_are_row_errors() {
        let src = "origin,dest,date\nJFK,JFK,2020-02-02\n";
        assert!(matches!(
            parse_flights(src.as_bytes(), &schema(), ParseMode::Strict),
            Err(IngestError::Row { line: 2, .. })
        ));
        let src = "origin,dest,date\nJFK,LAX\n";
        assert!(matches!(
            parse_flights(src.as_bytes(), &schema(), ParseMode::Strict),
            Err(IngestError::Row { line: 2, .. })
        ));
    }

    #[test]
    fn cancelled_rows_dropped_and_lenient_accounting() {
        let src = "origin,dest,date,cancelled\n\
                   JFK,LAX,2020-02-02,0.00\n\
                   JFK,ORD,2020-02-02,1.00\n\
                   ORD,ORD,2020-02-02,0\n\
                   ORD,LAX,2020-02-31,0\n\
                   lax,sfo,2020-02-02,false\n";
        let p = parse_flights(src.as_bytes(), &schema(), ParseMode::Lenient).unwrap();
        assert_eq!(p.records.len(), 2);
        assert_eq!(p.records[1].origin.as_str(), "LAX");
        assert_eq!(p.cancelled, 1);
        assert_eq!(p.rejected.iter().map(|e| e.line).collect::<Vec<_>>(), vec![4, 5]);
        assert_eq!(p.records.len() + p.cancelled + p.rejected.len(), p.data_rows);
    }

    #[test]
    fn missing_cancel_column_is_ignored_and_missing_required_is_error() {
        let p = parse_flights("origin,dest,date\nA,B,2020-01-01\n".as_bytes(), &schema(), ParseMode::Strict)
            .unwrap();
        assert_eq!(p.records.len(), 1);
        assert!(matches!(
            parse_flights("origin,date\n".as_bytes(), &schema(), ParseMode::Strict),
            Err(IngestError::MissingColumn(c)) if c == "dest"
        ));
    }

    #[test]
    fn date_format_override() {
        let s = FlightSchema {
            date_format: "%m/%d/%Y %I:%M:%S %p".into(),
            ..schema()
        };
        let p = parse_flights(
            "origin,dest,date\nJFK,LAX,2/2/2020 12:00:00 AM\n".as_bytes(),
            &s,
            ParseMode::Strict,
        )
        .unwrap();
        assert_eq!(p.records[0].date, d("2020-02-02"));
    }

    #[test]
    fn non_utf8_is_error() {
        let bytes: &[u8] = b"origin,dest,date\nJ\xffK,LAX,2020-02-02\n";
        assert!(matches!(
            parse_flights(bytes, &schema(), ParseMode::Lenient),
            Err(IngestError::NotUtf8 { line: 2 })
        ));
    }

    #[test]
    fn series_sorted_and_validated() {
        let src = "date,value\n2020-01-03,30\n2020-01-01,10\n2020-01-02,20\n";
        let p = parse_series(src.as_bytes(), &SeriesSchema::default(), ParseMode::Strict).unwrap();
        let values: Vec<f64> = p.records.iter().map(|o| o.value).collect();
        assert_eq!(values, vec![10.0, 20.0, 30.0]);
        assert!(p.records.windows(2).all(|w| w[0].date < w[1].date));

        let src = "date,value\n2020-01-01,n/a\n";
        assert!(matches!(
            parse_series(src.as_bytes(), &SeriesSchema::default(), ParseMode::Strict),
            Err(IngestError::Row { line: 2, .. })
        ));

        let src = "date,value\n2020-01-01,1\n2020-01-01,2\n";
        assert!(matches!(
            parse_series(src.as_bytes(), &SeriesSchema::default(), ParseMode::Strict),
            Err(IngestError::DuplicateDate(x)) if x == d("2020-01-01")
        ));
        let p = parse_series(src.as_bytes(), &SeriesSchema::default(), ParseMode::Lenient).unwrap();
        assert_eq!(p.records.len(), 1);
        assert_eq!(p.rejected.len(), 1);
    }

    #[test]
    fn airports_and_validation() {
        let src = "code,latitude,longitude\nJFK,40.64,-73.78\nLAX,33.94,-118.41\n";
        let (reg, _) = parse_airports(src.as_bytes(), &AirportSchema::default(), ParseMode::Strict).unwrap();
        assert_eq!(reg.len(), 2);

        let ok = vec![FlightRecord::new("JFK", "LAX", d("2020-02-02")).unwrap()];
        assert!(validate_airports(&ok, &reg).is_empty());
        assert!(validate_airports(&[], &reg).is_empty());

        let bad = vec![
            ok[0].clone(),
            FlightRecord::new("ZZZ", "LAX", d("2020-02-02")).unwrap(),
        ];
        let report = validate_airports(&bad, &reg);
        assert_eq!(report.unresolved.len(), 1);
        assert_eq!(report.unresolved[0].index, 1);
        assert_eq!(report.unresolved[0].unknown[0].as_str(), "ZZZ");

        let dup = "code,latitude,longitude\nJFK,40,-73\nJFK,40,-73\n";
        assert!(parse_airports(dup.as_bytes(), &AirportSchema::default(), ParseMode::Strict).is_err());
        let range = "code,latitude,longitude\nJFK,95,-73\n";
        assert!(parse_airports(range.as_bytes(), &AirportSchema::default(), ParseMode::Strict).is_err());
    }
}
