//! JSON system files and long-form schedule CSV.
//!
//! Any hourly series may be written inline or as `{"csv": "<path>", "column": "<name>"}`,
//! where the path is relative to the system file and the CSV starts with a 1-based
//! `hour` column.

use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{Error, Result};
use crate::system::{validate_system, PowerSystem};
use crate::ucd::{DispatchSchedule, Network, ReserveTrace, StorageTrace, ThermalTrace, VreTrace};

/// Reads, resolves and validates a system file.
pub fn load_system(path: impl AsRef<Path>) -> Result<PowerSystem> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let sys = parse_system(&text, base)?;
    let violations = validate_system(&sys);
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    Ok(sys)
}

/// Parses a system document without validating it. CSV references resolve against `base_dir`.
pub fn parse_system(text: &str, base_dir: &Path) -> Result<PowerSystem> {
    let mut doc: Value = serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("line {} column {}: {e}", e.line(), e.column())))?;
    let mut cache = HashMap::new();
    resolve_series(&mut doc, base_dir, "", &mut cache)?;
    serde_json::from_value(doc).map_err(|e| Error::Parse(e.to_string()))
}

/// Writes the system with every series inline.
pub fn save_system(sys: &PowerSystem, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(sys).expect("system serializes");
    fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

type CsvTable = (Vec<String>, Vec<Vec<f64>>);

fn resolve_series(v: &mut Value, base: &Path, at: &str, cache: &mut HashMap<PathBuf, CsvTable>) -> Result<()> {
    match v {
        Value::Object(map) => {
            if let (Some(Value::String(file)), Some(Value::String(col))) = (map.get("csv"), map.get("column")) {
                let series = read_column(&base.join(file), col, cache).map_err(|e| match e {
                    Error::Parse(m) => Error::Parse(format!("{at}: {m}")),
                    other => other,
                })?;
                *v = Value::Array(series.into_iter().map(Value::from).collect());
                return Ok(());
            }
            for (k, child) in map.iter_mut() {
                resolve_series(child, base, &format!("{at}/{k}"), cache)?;
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter_mut().enumerate() {
                resolve_series(child, base, &format!("{at}/{i}"), cache)?;
            }
        }
        _ => {}
    }
    Ok(())
}

fn read_column(path: &Path, column: &str, cache: &mut HashMap<PathBuf, CsvTable>) -> Result<Vec<f64>> {
    if !cache.contains_key(path) {
        let table = read_table(path)?;
        cache.insert(path.to_path_buf(), table);
    }
    let (headers, rows) = &cache[path];
    let idx = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::Parse(format!("{} has no column {column:?}", path.display())))?;
    Ok(rows.iter().map(|r| r[idx]).collect())
}

fn read_table(path: &Path) -> Result<CsvTable> {
    let file = fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.first().map(String::as_str) != Some("hour") {
        return Err(Error::Parse(format!("{}: first column must be `hour`", path.display())));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let line = i + 2;
        let mut row = Vec::with_capacity(rec.len());
        for (j, field) in rec.iter().enumerate() {
            let x: f64 = field.parse().map_err(|_| {
                Error::Parse(format!("{} line {line} column {}: not a number: {field:?}", path.display(), headers[j]))
            })?;
            row.push(x);
        }
        if row[0] != (i + 1) as f64 {
            return Err(Error::Parse(format!(
                "{} line {line}: expected hour {}, found {}",
                path.display(),
                i + 1,
                row[0]
            )));
        }
        rows.push(row);
    }
    Ok((headers, rows))
}

const SYSTEM: &str = "system";

/// Writes `sched` as long-form CSV `hour,unit,field,value` with 1-based hours.
///
/// Rows labelled with the hour before the first one (`start_hour`, so `0` for a
/// schedule starting at the beginning) carry the state before the first hour
/// (`online` and `output` per thermal unit, `soc` per store) and the constants
/// `system,voll`, `system,reserve_shortfall_penalty` and `system,nodal`.
pub fn write_schedule_csv<W: Write>(sys: &PowerSystem, sched: &DispatchSchedule, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Parse(format!("cannot write schedule: {e}"));
    w.write_record(["hour", "unit", "field", "value"]).map_err(io)?;
    let mut row = |hour: usize, unit: &str, field: &str, value: f64| {
        w.write_record([hour.to_string().as_str(), unit, field, value.to_string().as_str()])
    };
    let h0 = sched.start_hour;
    for (g, gen) in sys.thermal.iter().enumerate() {
        row(h0, &gen.id, "online", if sched.initial_online[g] { 1.0 } else { 0.0 }).map_err(io)?;
        row(h0, &gen.id, "output", sched.initial_output[g]).map_err(io)?;
    }
    for (s, dev) in sys.storage.iter().enumerate() {
        row(h0, &dev.id, "soc", sched.initial_soc[s]).map_err(io)?;
    }
    row(h0, SYSTEM, "voll", sched.voll).map_err(io)?;
    row(h0, SYSTEM, "reserve_shortfall_penalty", sched.reserve_shortfall_penalty).map_err(io)?;
    row(h0, SYSTEM, "nodal", if sched.network == Network::Nodal { 1.0 } else { 0.0 }).map_err(io)?;
    let unserved_ids: Vec<&str> = if sched.network == Network::Nodal {
        sys.buses.iter().map(|b| b.id.as_str()).collect()
    } else {
        vec![SYSTEM]
    };
    for t in 0..sched.hours {
        let h = h0 + t + 1;
        for (gen, tr) in sys.thermal.iter().zip(&sched.thermal) {
            row(h, &gen.id, "output", tr.output[t]).map_err(io)?;
            row(h, &gen.id, "online", tr.online[t]).map_err(io)?;
            row(h, &gen.id, "start", tr.start[t]).map_err(io)?;
            row(h, &gen.id, "stop", tr.stop[t]).map_err(io)?;
        }
        for (unit, tr) in sys.vre.iter().zip(&sched.vre) {
            row(h, &unit.id, "available", tr.available[t]).map_err(io)?;
            row(h, &unit.id, "dispatch", tr.dispatch[t]).map_err(io)?;
        }
        for (dev, tr) in sys.storage.iter().zip(&sched.storage) {
            row(h, &dev.id, "charge", tr.charge[t]).map_err(io)?;
            row(h, &dev.id, "discharge", tr.discharge[t]).map_err(io)?;
            row(h, &dev.id, "soc", tr.soc[t]).map_err(io)?;
            row(h, &dev.id, "charge_mode", tr.charge_mode[t]).map_err(io)?;
        }
        for (product, tr) in sys.reserves.iter().zip(&sched.reserves) {
            let field = format!("reserve:{}", product.id);
            row(h, &product.id, "requirement", tr.requirement[t]).map_err(io)?;
            row(h, &product.id, "shortfall", tr.shortfall[t]).map_err(io)?;
            for (gen, r) in sys.thermal.iter().zip(&tr.thermal) {
                row(h, &gen.id, &field, r[t]).map_err(io)?;
            }
            for (dev, r) in sys.storage.iter().zip(&tr.storage) {
                row(h, &dev.id, &field, r[t]).map_err(io)?;
            }
        }
        for (l, f) in sys.lines.iter().zip(&sched.flows) {
            row(h, &l.id, "flow", f[t]).map_err(io)?;
        }
        for (b, a) in sys.buses.iter().zip(&sched.angles) {
            row(h, &b.id, "angle", a[t]).map_err(io)?;
        }
        for (id, u) in unserved_ids.iter().zip(&sched.unserved) {
            row(h, id, "unserved", u[t]).map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::Parse(format!("cannot write schedule: {e}")))?;
    Ok(())
}

/// Reads a schedule written by [`write_schedule_csv`] for the same system.
/// Every hour counts as committed; objective components are recomputed.
pub fn read_schedule_csv<R: Read>(sys: &PowerSystem, input: R) -> Result<DispatchSchedule> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("schedule line {}: {e}", i + 2)))?;
        let bad = || Error::Parse(format!("schedule line {}: malformed row", i + 2));
        if rec.len() != 4 {
            return Err(bad());
        }
        let hour: usize = rec[0].parse().map_err(|_| bad())?;
        let value: f64 = rec[3].parse().map_err(|_| bad())?;
        rows.push((hour, rec[1].to_string(), rec[2].to_string(), value));
    }
    let first = rows.iter().map(|r| r.0).min().ok_or_else(|| Error::Parse("empty schedule".into()))?;
    let last = rows.iter().map(|r| r.0).max().unwrap_or(first);
    let n = last - first;
    let nodal = rows.iter().any(|r| r.0 == first && r.1 == SYSTEM && r.2 == "nodal" && r.3 == 1.0);
    let zeros = || vec![0.0; n];
    let mut s = DispatchSchedule {
        start_hour: first,
        hours: n,
        committed_hours: n,
        network: if nodal { Network::Nodal } else { Network::CopperPlate },
        thermal: sys
            .thermal
            .iter()
            .map(|_| ThermalTrace { output: zeros(), online: zeros(), start: zeros(), stop: zeros() })
            .collect(),
        vre: sys.vre.iter().map(|_| VreTrace { available: zeros(), dispatch: zeros() }).collect(),
        storage: sys
            .storage
            .iter()
            .map(|_| StorageTrace { charge: zeros(), discharge: zeros(), soc: zeros(), charge_mode: zeros() })
            .collect(),
        reserves: sys
            .reserves
            .iter()
            .map(|_| ReserveTrace {
                requirement: zeros(),
                thermal: vec![zeros(); sys.thermal.len()],
                storage: vec![zeros(); sys.storage.len()],
                shortfall: zeros(),
            })
            .collect(),
        flows: vec![zeros(); if nodal { sys.lines.len() } else { 0 }],
        angles: vec![zeros(); if nodal { sys.buses.len() } else { 0 }],
        unserved: vec![zeros(); if nodal { sys.buses.len() } else { 1 }],
        voll: 0.0,
        reserve_shortfall_penalty: 0.0,
        initial_soc: sys.storage.iter().map(|d| d.initial_soc).collect(),
        initial_online: sys.thermal.iter().map(|g| g.initial_online).collect(),
        initial_output: sys.thermal.iter().map(|g| g.initial_output).collect(),
        objective: Default::default(),
    };
    let thermal = |id: &str| sys.thermal.iter().position(|g| g.id == id);
    let vre = |id: &str| sys.vre.iter().position(|v| v.id == id);
    let store = |id: &str| sys.storage_index(id);
    let product = |id: &str| sys.reserves.iter().position(|r| r.id == id);
    let line = |id: &str| sys.lines.iter().position(|l| l.id == id);
    for (hour, unit, field, v) in rows {
        let unknown = || Error::Parse(format!("schedule hour {hour}: unknown entry {unit},{field}"));
        if hour == first {
            match (field.as_str(), thermal(&unit), store(&unit)) {
                ("online", Some(g), _) => s.initial_online[g] = v > 0.5,
                ("output", Some(g), _) => s.initial_output[g] = v,
                ("soc", _, Some(k)) => s.initial_soc[k] = v,
                ("voll", ..) if unit == SYSTEM => s.voll = v,
                ("reserve_shortfall_penalty", ..) if unit == SYSTEM => s.reserve_shortfall_penalty = v,
                ("nodal", ..) if unit == SYSTEM => {}
                _ => return Err(unknown()),
            }
            continue;
        }
        let t = hour - first - 1;
        let slot: &mut f64 = match field.as_str() {
            "output" | "online" | "start" | "stop" => {
                let tr = &mut s.thermal[thermal(&unit).ok_or_else(unknown)?];
                match field.as_str() {
                    "output" => &mut tr.output[t],
                    "online" => &mut tr.online[t],
                    "start" => &mut tr.start[t],
                    _ => &mut tr.stop[t],
                }
            }
            "available" => &mut s.vre[vre(&unit).ok_or_else(unknown)?].available[t],
            "dispatch" => &mut s.vre[vre(&unit).ok_or_else(unknown)?].dispatch[t],
            "charge" | "discharge" | "soc" | "charge_mode" => {
                let tr = &mut s.storage[store(&unit).ok_or_else(unknown)?];
                match field.as_str() {
                    "charge" => &mut tr.charge[t],
                    "discharge" => &mut tr.discharge[t],
                    "soc" => &mut tr.soc[t],
                    _ => &mut tr.charge_mode[t],
                }
            }
            "requirement" => &mut s.reserves[product(&unit).ok_or_else(unknown)?].requirement[t],
            "shortfall" => &mut s.reserves[product(&unit).ok_or_else(unknown)?].shortfall[t],
            "flow" if nodal => &mut s.flows[line(&unit).ok_or_else(unknown)?][t],
            "angle" if nodal => &mut s.angles[sys.bus_index(&unit).ok_or_else(unknown)?][t],
            "unserved" if nodal => &mut s.unserved[sys.bus_index(&unit).ok_or_else(unknown)?][t],
            "unserved" if unit == SYSTEM => &mut s.unserved[0][t],
            f => {
                let p = f.strip_prefix("reserve:").and_then(product).ok_or_else(unknown)?;
                if let Some(g) = thermal(&unit) {
                    &mut s.reserves[p].thermal[g][t]
                } else {
                    &mut s.reserves[p].storage[store(&unit).ok_or_else(unknown)?][t]
                }
            }
        };
        *slot = v;
    }
    s.objective = s.costs(sys, 0..n);
    Ok(s)
}
