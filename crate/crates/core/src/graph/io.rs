//! Plain-text formats.
//!
//! Edge lists start with a header `n T` followed by `t i j` lines. Label files
//! use the same header (optionally `n T k`) followed by `t i label` lines.
//! Blank lines and lines starting with `#` are ignored.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{LabelMatrix, TemporalGraph};
use crate::error::{io_err, Error, Result};

fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(k, line)| {
        let line = line.trim();
        (!line.is_empty() && !line.starts_with('#'))
            .then(|| (k + 1, line.split_whitespace().collect()))
    })
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| parse_err(path, line, format!("invalid {what} `{tok}`")))
}

fn header<'a>(path: &Path, lines: &mut impl Iterator<Item = (usize, Vec<&'a str>)>) -> Result<(usize, usize, Option<usize>)> {
    let (line, toks) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "missing `n T` header"))?;
    if toks.len() != 2 && toks.len() != 3 {
        return Err(parse_err(path, line, "header must be `n T`"));
    }
    let n = field(path, line, toks[0], "node count")?;
    let t = field(path, line, toks[1], "snapshot count")?;
    if t == 0 {
        return Err(parse_err(path, line, "T must be at least 1"));
    }
    let k = toks
        .get(2)
        .map(|tok| field(path, line, tok, "class count"))
        .transpose()?;
    Ok((n, t, k))
}

/// Parses a temporal edge list. `source` names the input in error messages.
pub fn parse_temporal_edgelist(text: &str, source: impl Into<PathBuf>) -> Result<TemporalGraph> {
    let path = source.into();
    let mut lines = data_lines(text);
    let (n, t_count, _) = header(&path, &mut lines)?;
    let mut per_time = vec![Vec::new(); t_count];
    for (line, toks) in lines {
        if toks.len() != 3 {
            return Err(parse_err(&path, line, "expected `t i j`"));
        }
        let t: usize = field(&path, line, toks[0], "time")?;
        let i: usize = field(&path, line, toks[1], "node")?;
        let j: usize = field(&path, line, toks[2], "node")?;
        if t >= t_count || i >= n || j >= n {
            return Err(Error::Bounds(format!(
                "{}: line {line}: ({t}, {i}, {j}) outside n = {n}, T = {t_count}",
                path.display()
            )));
        }
        per_time[t].push((i, j));
    }
    TemporalGraph::from_edges(n, per_time)
}

pub fn load_temporal_edgelist(path: impl AsRef<Path>) -> Result<TemporalGraph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_temporal_edgelist(&text, path)
}

pub fn write_temporal_edgelist(g: &TemporalGraph, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{} {}", g.n(), g.num_snapshots())?;
    for (t, s) in g.snapshots().iter().enumerate() {
        for &(i, j) in s.edges() {
            writeln!(out, "{t} {i} {j}")?;
        }
    }
    Ok(())
}

pub fn save_temporal_edgelist(g: &TemporalGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = std::io::BufWriter::new(file);
    write_temporal_edgelist(g, &mut w)
        .and_then(|_| w.flush())
        .map_err(io_err(path))
}

/// Parses a label file. Every `(node, time)` must be assigned exactly once.
/// Without a `k` in the header, `k` is one more than the largest label.
pub fn parse_labels(text: &str, source: impl Into<PathBuf>) -> Result<LabelMatrix> {
    let path = source.into();
    let mut lines = data_lines(text);
    let (n, t_count, k) = header(&path, &mut lines)?;
    let mut data = vec![usize::MAX; n * t_count];
    for (line, toks) in lines {
        if toks.len() != 3 {
            return Err(parse_err(&path, line, "expected `t i label`"));
        }
        let t: usize = field(&path, line, toks[0], "time")?;
        let i: usize = field(&path, line, toks[1], "node")?;
        let l: usize = field(&path, line, toks[2], "label")?;
        if t >= t_count || i >= n {
            return Err(Error::Bounds(format!(
                "{}: line {line}: ({t}, {i}) outside n = {n}, T = {t_count}",
                path.display()
            )));
        }
        data[t * n + i] = l;
    }
    if let Some(pos) = data.iter().position(|&l| l == usize::MAX) {
        return Err(parse_err(
            &path,
            0,
            format!("no label for node {} at time {}", pos % n.max(1), pos / n.max(1)),
        ));
    }
    let k = k.unwrap_or_else(|| data.iter().max().map_or(1, |m| m + 1));
    LabelMatrix::new(n, t_count, k, data)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_labels(&text, path)
}

pub fn write_labels(labels: &LabelMatrix, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{} {} {}", labels.n(), labels.num_snapshots(), labels.k())?;
    for t in 0..labels.num_snapshots() {
        for (i, l) in labels.column(t).iter().enumerate() {
            writeln!(out, "{t} {i} {l}")?;
        }
    }
    Ok(())
}

pub fn save_labels(labels: &LabelMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = std::io::BufWriter::new(file);
    write_labels(labels, &mut w)
        .and_then(|_| w.flush())
        .map_err(io_err(path))
}

/// Node identifiers ordered numerically when they all parse as integers,
/// lexicographically otherwise.
fn dense_ids<'a>(ids: impl Iterator<Item = &'a str>) -> BTreeMap<String, usize> {
    let mut uniq: Vec<&str> = ids.collect();
    uniq.sort_unstable();
    uniq.dedup();
    if uniq.iter().all(|s| s.parse::<i64>().is_ok()) {
        uniq.sort_by_key(|s| s.parse::<i64>().unwrap());
    }
    uniq.into_iter()
        .enumerate()
        .map(|(k, s)| (s.to_string(), k))
        .collect()
}

/// Bins a `timestamp i j` contact stream into `t_count` windows of width
/// `window` starting at `t_start`. Every node seen anywhere in the stream gets
/// an index, so nodes without contacts in a window are isolated there.
pub fn parse_contact_stream(
    text: &str,
    source: impl Into<PathBuf>,
    window: f64,
    t_start: f64,
    t_count: usize,
) -> Result<TemporalGraph> {
    let path = source.into();
    if !(window > 0.0) || t_count == 0 {
        return Err(Error::Config("window must be positive and T >= 1".into()));
    }
    let mut contacts = Vec::new();
    for (line, toks) in data_lines(text) {
        if toks.len() < 3 {
            return Err(parse_err(&path, line, "expected `timestamp i j`"));
        }
        let ts: f64 = field(&path, line, toks[0], "timestamp")?;
        contacts.push((ts, toks[1], toks[2]));
    }
    let ids = dense_ids(contacts.iter().flat_map(|c| [c.1, c.2]));
    let mut per_time = vec![Vec::new(); t_count];
    let mut any = false;
    for (ts, a, b) in &contacts {
        let slot = ((ts - t_start) / window).floor();
        if slot >= 0.0 && slot < t_count as f64 {
            per_time[slot as usize].push((ids[*a], ids[*b]));
            any = true;
        }
    }
    if !any {
        return Err(Error::Config(format!(
            "{}: no contact falls in [{t_start}, {})",
            path.display(),
            t_start + window * t_count as f64
        )));
    }
    TemporalGraph::from_edges(ids.len(), per_time)
}

pub fn ingest_contact_stream(
    path: impl AsRef<Path>,
    window: f64,
    t_start: f64,
    t_count: usize,
) -> Result<TemporalGraph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_contact_stream(&text, path, window, t_start, t_count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edgelist_examples() {
        let g = parse_temporal_edgelist("2 1\n0 0 1", "a").unwrap();
        assert_eq!((g.n(), g.num_snapshots()), (2, 1));
        assert_eq!(g.snapshot(0).edges(), &[(0, 1)]);

        let g = parse_temporal_edgelist("3 2\n0 0 1\n0 1 0\n1 1 2", "b").unwrap();
        assert_eq!(g.snapshot(0).edges(), &[(0, 1)]);
        assert_eq!(g.snapshot(1).edges(), &[(1, 2)]);

        let g = parse_temporal_edgelist("2 1\n0 0 0", "c").unwrap();
        assert_eq!(g.snapshot(0).num_edges(), 0);
    }

    #[test]
    fn edgelist_errors() {
        match parse_temporal_edgelist("2 1\n0 0 1\n0 x 1", "bad") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_temporal_edgelist("2 1\n0 0 2", "oob"),
            Err(Error::Bounds(_))
        ));
        assert!(matches!(
            parse_temporal_edgelist("2 1\n1 0 1", "oob"),
            Err(Error::Bounds(_))
        ));
        assert!(parse_temporal_edgelist("", "empty").is_err());
    }

    #[test]
    fn labels_round_trip() {
        let l = LabelMatrix::new(3, 2, 3, vec![0, 1, 2, 2, 1, 0]).unwrap();
        let mut buf = Vec::new();
        write_labels(&l, &mut buf).unwrap();
        let back = parse_labels(std::str::from_utf8(&buf).unwrap(), "mem").unwrap();
        assert_eq!(back, l);
        assert!(parse_labels("2 1\n0 0 1", "short").is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = TemporalGraph::from_edges(4, vec![vec![(0, 1), (2, 3)], vec![(1, 2)]]).unwrap();
        let p = dir.path().join("g.txt");
        save_temporal_edgelist(&g, &p).unwrap();
        assert_eq!(load_temporal_edgelist(&p).unwrap(), g);
    }

    #[test]
    fn contact_binning() {
        let g = parse_contact_stream("0 a b\n10 a b\n", "s", 15.0, 0.0, 2).unwrap();
        assert_eq!(g.snapshot(0).edges(), &[(0, 1)]);
        assert_eq!(g.snapshot(1).num_edges(), 0);

        let g = parse_contact_stream("1 0 1\n2 1 2\n3 0 1\n", "s", 15.0, 0.0, 1).unwrap();
        assert_eq!(g.snapshot(0).edges(), &[(0, 1), (1, 2)]);

        // Non-monotone timestamps and numeric id ordering.
        let g = parse_contact_stream("20 10 2\n5 2 9\n", "s", 15.0, 0.0, 2).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.snapshot(0).edges(), &[(0, 1)]);
        assert_eq!(g.snapshot(1).edges(), &[(0, 2)]);

        assert!(parse_contact_stream("100 0 1\n", "s", 15.0, 0.0, 2).is_err());
    }
}
