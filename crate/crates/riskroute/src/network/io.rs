//! On-disk formats: graph directories (`nodes.csv` + `edges.csv`) and
//! travel-time profiles (CSV, or the `RRP1` length-prefixed binary format
//! with little-endian 64-bit floats).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::dist::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::network::{DayClass, Graph, Node, TimeProfile, TimeProfileBuilder, HOURS_PER_DAY};

const PROFILE_MAGIC: &[u8; 4] = b"RRP1";

/// Load a graph from a directory holding `nodes.csv` (id,lat,lon) and
/// `edges.csv` (id,tail,head,length_m,speed_limit_mps).
pub fn load_graph(dir: &Path) -> Result<Graph> {
    let nodes_path = dir.join("nodes.csv");
    let mut nodes = Vec::new();
    let mut rdr = csv::Reader::from_path(&nodes_path)
        .map_err(|e| Error::parse(nodes_path.display().to_string(), e.to_string()))?;
    for (i, rec) in rdr.records().enumerate() {
        let ctx = || format!("{}:{}", nodes_path.display(), i + 2);
        let rec = rec.map_err(|e| Error::parse(ctx(), e.to_string()))?;
        nodes.push(Node {
            id: field(&rec, 0, ctx)?,
            lat: field(&rec, 1, ctx)?,
            lon: field(&rec, 2, ctx)?,
        });
    }

    let edges_path = dir.join("edges.csv");
    let mut edges = Vec::new();
    let mut rdr = csv::Reader::from_path(&edges_path)
        .map_err(|e| Error::parse(edges_path.display().to_string(), e.to_string()))?;
    for (i, rec) in rdr.records().enumerate() {
        let ctx = || format!("{}:{}", edges_path.display(), i + 2);
        let rec = rec.map_err(|e| Error::parse(ctx(), e.to_string()))?;
        edges.push((
            field(&rec, 0, ctx)?,
            field(&rec, 1, ctx)?,
            field(&rec, 2, ctx)?,
            field(&rec, 3, ctx)?,
            field(&rec, 4, ctx)?,
        ));
    }
    Graph::new(nodes, edges)
}

pub fn save_graph(graph: &Graph, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("nodes.csv"))
        .map_err(|e| Error::parse("nodes.csv", e.to_string()))?;
    w.write_record(["id", "lat", "lon"]).map_err(csv_err)?;
    for n in graph.nodes() {
        w.write_record([n.id.to_string(), n.lat.to_string(), n.lon.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("edges.csv"))
        .map_err(|e| Error::parse("edges.csv", e.to_string()))?;
    w.write_record(["id", "tail", "head", "length_m", "speed_limit_mps"])
        .map_err(csv_err)?;
    for e in graph.edges() {
        w.write_record([
            e.id.to_string(),
            graph.node(e.tail).id.to_string(),
            graph.node(e.head).id.to_string(),
            e.length_m.to_string(),
            e.speed_limit_mps.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Load a profile and resolve it against `graph`. `.csv` files use the text
/// format, anything else the `RRP1` binary format.
pub fn load_profile(path: &Path, graph: &Graph) -> Result<TimeProfile> {
    if path.extension().is_some_and(|e| e == "csv") {
        load_profile_csv(path, graph)
    } else {
        load_profile_binary(path, graph)
    }
}

pub fn save_profile(profile: &TimeProfile, path: &Path) -> Result<()> {
    if path.extension().is_some_and(|e| e == "csv") {
        save_profile_csv(profile, path)
    } else {
        save_profile_binary(profile, path)
    }
}

/// One row per (edge, day class, hour): `edge_id,day_class,hour,bin_width`
/// followed by the dense pmf from bin 0.
fn save_profile_csv(profile: &TimeProfile, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(csv_err)?;
    for edge_idx in 0..profile.num_edges() {
        let edge_id = profile.edge_ids()[edge_idx];
        for class in DayClass::ALL {
            for hour in 0..HOURS_PER_DAY {
                let d = profile.cell(edge_idx, class, hour);
                let mut row = vec![
                    edge_id.to_string(),
                    class.as_str().to_string(),
                    hour.to_string(),
                    profile.bin_width().to_string(),
                ];
                row.extend(std::iter::repeat("0".to_string()).take(d.offset_bins() as usize));
                row.extend(d.pmf().iter().map(|p| p.to_string()));
                w.write_record(&row).map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn load_profile_csv(path: &Path, graph: &Graph) -> Result<TimeProfile> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    let mut rows = Vec::new();
    let mut max_support: f64 = 0.0;
    let mut bin_width = 0.0;
    for (i, rec) in rdr.records().enumerate() {
        let ctx = || format!("{}:{}", path.display(), i + 1);
        let rec = rec.map_err(|e| Error::parse(ctx(), e.to_string()))?;
        if rec.len() < 5 {
            return Err(Error::parse(ctx(), "expected at least 5 fields"));
        }
        let edge_id: u64 = field(&rec, 0, ctx)?;
        let class = DayClass::parse(rec.get(1).unwrap())?;
        let hour: usize = field(&rec, 2, ctx)?;
        let w: f64 = field(&rec, 3, ctx)?;
        if bin_width == 0.0 {
            bin_width = w;
        } else if bin_width != w {
            return Err(Error::BinWidthMismatch(bin_width, w));
        }
        let mut pmf = Vec::with_capacity(rec.len() - 4);
        for j in 4..rec.len() {
            pmf.push(field(&rec, j, ctx)?);
        }
        let d = DiscreteDistribution::from_counts(w, 0, pmf)
            .map_err(|e| Error::parse(ctx(), e.to_string()))?;
        max_support = max_support.max(d.support_max());
        rows.push((edge_id, class, hour, d));
    }
    if rows.is_empty() {
        return Err(Error::parse(path.display().to_string(), "empty profile"));
    }
    let mut builder = TimeProfileBuilder::new(bin_width, max_support.max(bin_width));
    for (edge_id, class, hour, d) in rows {
        builder.set(edge_id, class, hour, d)?;
    }
    builder.build(graph)
}

/// Binary layout, all little-endian: magic `RRP1`, bin_width f64, edge_cap
/// f64, record count u64, then per record: edge_id u64, day_class u8, hour
/// u8, offset_bins u32, pmf length u32, pmf f64s.
fn save_profile_binary(profile: &TimeProfile, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(PROFILE_MAGIC)?;
    w.write_all(&profile.bin_width().to_le_bytes())?;
    w.write_all(&profile.edge_cap().to_le_bytes())?;
    let count = profile.num_edges() as u64 * 2 * HOURS_PER_DAY as u64;
    w.write_all(&count.to_le_bytes())?;
    for edge_idx in 0..profile.num_edges() {
        let edge_id = profile.edge_ids()[edge_idx];
        for class in DayClass::ALL {
            for hour in 0..HOURS_PER_DAY {
                let d = profile.cell(edge_idx, class, hour);
                w.write_all(&edge_id.to_le_bytes())?;
                w.write_all(&[class.index() as u8, hour as u8])?;
                w.write_all(&(d.offset_bins() as u32).to_le_bytes())?;
                w.write_all(&(d.pmf().len() as u32).to_le_bytes())?;
                for p in d.pmf() {
                    w.write_all(&p.to_le_bytes())?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn load_profile_binary(path: &Path, graph: &Graph) -> Result<TimeProfile> {
    let ctx = || path.display().to_string();
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != PROFILE_MAGIC {
        return Err(Error::parse(ctx(), "bad magic, not an RRP1 profile"));
    }
    let bin_width = read_f64(&mut r)?;
    let edge_cap = read_f64(&mut r)?;
    let count = read_u64(&mut r)?;
    let mut builder = TimeProfileBuilder::new(bin_width, edge_cap);
    for _ in 0..count {
        let edge_id = read_u64(&mut r)?;
        let mut b = [0u8; 2];
        r.read_exact(&mut b)?;
        let class = if b[0] == 0 { DayClass::Weekdays } else { DayClass::Weekends };
        let hour = b[1] as usize;
        let offset = read_u32(&mut r)? as u64;
        let len = read_u32(&mut r)? as usize;
        let mut pmf = Vec::with_capacity(len);
        for _ in 0..len {
            pmf.push(read_f64(&mut r)?);
        }
        let d = DiscreteDistribution::from_counts(bin_width, offset, pmf)
            .map_err(|e| Error::parse(ctx(), e.to_string()))?;
        builder.set(edge_id, class, hour, d)?;
    }
    builder.build(graph)
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    idx: usize,
    ctx: impl Fn() -> String,
) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec
        .get(idx)
        .ok_or_else(|| Error::parse(ctx(), format!("missing field {idx}")))?;
    raw.trim()
        .parse()
        .map_err(|e: T::Err| Error::parse(ctx(), format!("field {idx} '{raw}': {e}")))
}

fn csv_err(e: csv::Error) -> Error {
    Error::parse("csv", e.to_string())
}
