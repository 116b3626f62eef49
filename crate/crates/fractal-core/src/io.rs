//! Artifact formats: point-sequence CSV, driver CSV, event-scan CSV,
//! multi-polyline CSV, percolation cell CSV, PGM rasters, and JSON records.
//!
//! All writers format floats with Rust's shortest round-trip representation,
//! so files are byte-deterministic for identical inputs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::brownian::DyadicEventHit;
use crate::error::{CoreError, Result};
use crate::geom::PolyCurve;
use crate::percolation::PercTree;

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Write a point sequence as CSV: columns `x0..x_{d-1}`, plus a final `t`
/// column when the curve is time-stamped.
pub fn write_points_csv(path: &Path, curve: &PolyCurve) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let d = curve.dim();
    let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    if curve.times().is_some() {
        header.push("t".to_string());
    }
    w.write_record(&header)?;
    for i in 0..curve.len() {
        let mut rec: Vec<String> = curve.point(i).iter().map(|&v| fmt(v)).collect();
        if let Some(ts) = curve.times() {
            rec.push(fmt(ts[i]));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a point-sequence CSV written by [`write_points_csv`]: coordinate
/// columns are located by the `x0..x_{d-1}` names (any column order), and an
/// optional `t` column supplies times.
pub fn read_points_csv(path: &Path) -> Result<PolyCurve> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let mut coord_cols = Vec::new();
    loop {
        let name = format!("x{}", coord_cols.len());
        match headers.iter().position(|h| h == name) {
            Some(i) => coord_cols.push(i),
            None => break,
        }
    }
    if coord_cols.is_empty() {
        return Err(CoreError::Format(format!(
            "no x0 column in {}",
            path.display()
        )));
    }
    let t_col = headers.iter().position(|h| h == "t");
    let mut points = Vec::new();
    let mut times = t_col.map(|_| Vec::new());
    for rec in r.records() {
        let rec = rec?;
        for &c in &coord_cols {
            points.push(parse_f64(rec.get(c), path)?);
        }
        if let (Some(ts), Some(c)) = (&mut times, t_col) {
            ts.push(parse_f64(rec.get(c), path)?);
        }
    }
    PolyCurve::new(coord_cols.len(), points, times)
}

fn parse_f64(field: Option<&str>, path: &Path) -> Result<f64> {
    field
        .ok_or_else(|| CoreError::Format(format!("short record in {}", path.display())))?
        .trim()
        .parse::<f64>()
        .map_err(|e| CoreError::Format(format!("bad number in {}: {e}", path.display())))
}

/// Write a driving function as CSV with columns (t, W, V); the V column is
/// left empty when no force point is tracked.
pub fn write_driver_csv(path: &Path, t: &[f64], w: &[f64], v: Option<&[f64]>) -> Result<()> {
    if t.len() != w.len() || v.is_some_and(|v| v.len() != t.len()) {
        return Err(CoreError::invalid("driver columns must share one length"));
    }
    let mut out = csv::Writer::from_path(path)?;
    out.write_record(["t", "W", "V"])?;
    for i in 0..t.len() {
        let v_field = v.map_or(String::new(), |v| fmt(v[i]));
        out.write_record([fmt(t[i]), fmt(w[i]), v_field])?;
    }
    out.flush()?;
    Ok(())
}

/// Read a (t, W, V) driver CSV; V is `None` when every V field is empty.
pub fn read_driver_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Option<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CoreError::Format(format!("missing column {name} in {}", path.display())))
    };
    let (tc, wc, vc) = (col("t")?, col("W")?, col("V")?);
    let mut t = Vec::new();
    let mut w = Vec::new();
    let mut v = Vec::new();
    let mut v_empty = 0usize;
    for rec in r.records() {
        let rec = rec?;
        t.push(parse_f64(rec.get(tc), path)?);
        w.push(parse_f64(rec.get(wc), path)?);
        let vf = rec.get(vc).unwrap_or("").trim();
        if vf.is_empty() {
            v_empty += 1;
            v.push(f64::NAN);
        } else {
            v.push(parse_f64(Some(vf), path)?);
        }
    }
    let v = if v_empty == v.len() {
        None
    } else if v_empty == 0 {
        Some(v)
    } else {
        return Err(CoreError::Format(format!(
            "mixed empty and present V fields in {}",
            path.display()
        )));
    };
    Ok((t, w, v))
}

/// Write dyadic-event scan hits as CSV (level, index, increment_norm,
/// max_excursion).
pub fn write_scan_csv(path: &Path, hits: &[DyadicEventHit]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["level", "index", "increment_norm", "max_excursion"])?;
    for h in hits {
        w.write_record([
            h.level.to_string(),
            h.index.to_string(),
            fmt(h.increment_norm),
            fmt(h.max_excursion),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write a family of planar polylines as CSV (loop_id, vertex_index, x, y).
/// Each entry of `polylines` is a flat x,y buffer.
pub fn write_multi_polyline_csv(path: &Path, polylines: &[&[f64]]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["loop_id", "vertex_index", "x", "y"])?;
    for (id, poly) in polylines.iter().enumerate() {
        if poly.len() % 2 != 0 {
            return Err(CoreError::invalid("polyline buffers must be x,y pairs"));
        }
        for (k, xy) in poly.chunks(2).enumerate() {
            w.write_record([id.to_string(), k.to_string(), fmt(xy[0]), fmt(xy[1])])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a multi-polyline CSV back as flat x,y buffers, grouped by loop_id
/// (ids must be grouped contiguously; vertex order is file order).
pub fn read_multi_polyline_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut last_id: Option<u64> = None;
    let mut seen: std::collections::HashSet<u64> = std::collections::HashSet::new();
    for rec in r.records() {
        let rec = rec?;
        let id: u64 = rec
            .get(0)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|e| CoreError::Format(format!("bad loop_id in {}: {e}", path.display())))?;
        if last_id != Some(id) {
            if !seen.insert(id) {
                return Err(CoreError::Format(format!(
                    "loop_id {id} not contiguous in {}",
                    path.display()
                )));
            }
            out.push(Vec::new());
            last_id = Some(id);
        }
        let poly = out.last_mut().expect("pushed above");
        poly.push(parse_f64(rec.get(2), path)?);
        poly.push(parse_f64(rec.get(3), path)?);
    }
    Ok(out)
}

/// Write a percolation tree as CSV (level, digit-string): one row per kept
/// cell, the digit-string giving the cell's refinement path with one
/// character per level and axes joined by '-' (e.g. "021-110" for a level-3
/// cell in the plane). Requires l <= 36 (digits 0-9a-z). The level-0 root row
/// has an empty digit-string.
pub fn write_perc_csv(path: &Path, tree: &PercTree) -> Result<()> {
    if tree.l() > 36 {
        return Err(CoreError::invalid("digit-string export requires l <= 36"));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["level", "cell"])?;
    for k in 0..=tree.depth() {
        for i in 0..tree.count(k) {
            let coords = tree.cell(k, i);
            let cell = coords
                .iter()
                .map(|&c| digit_string(c, tree.l(), k))
                .collect::<Vec<_>>()
                .join("-");
            w.write_record([k.to_string(), cell])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn digit_string(coord: u32, l: u32, level: u32) -> String {
    const ALPHABET: &[u8] = b"0123456789abcdefghijklmnopqrstuvwxyz";
    let mut s = vec![b'0'; level as usize];
    let mut rem = coord;
    for j in (0..level as usize).rev() {
        s[j] = ALPHABET[(rem % l) as usize];
        rem /= l;
    }
    String::from_utf8(s).expect("alphabet is ASCII")
}

/// Read a (level, digit-string) percolation CSV back into per-level flat
/// coordinate buffers (to be validated by `PercTree::from_levels`).
pub fn read_perc_csv(path: &Path, n: usize, l: u32) -> Result<Vec<Vec<u32>>> {
    if l > 36 {
        return Err(CoreError::invalid("digit-string import requires l <= 36"));
    }
    let mut r = csv::Reader::from_path(path)?;
    let mut levels: Vec<Vec<u32>> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let level: usize = rec
            .get(0)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|e| CoreError::Format(format!("bad level in {}: {e}", path.display())))?;
        while levels.len() <= level {
            levels.push(Vec::new());
        }
        let cell = rec.get(1).unwrap_or("").trim();
        let axes: Vec<&str> = if cell.is_empty() {
            vec![""; n]
        } else {
            cell.split('-').collect()
        };
        if axes.len() != n {
            return Err(CoreError::Format(format!(
                "cell '{cell}' has {} axes, expected {n}",
                axes.len()
            )));
        }
        for axis in axes {
            if axis.len() != level {
                return Err(CoreError::Format(format!(
                    "cell '{cell}' digit count mismatches level {level}"
                )));
            }
            let mut v: u32 = 0;
            for ch in axis.bytes() {
                let d = match ch {
                    b'0'..=b'9' => ch - b'0',
                    b'a'..=b'z' => ch - b'a' + 10,
                    _ => {
                        return Err(CoreError::Format(format!(
                            "bad digit '{}' in {}",
                            ch as char,
                            path.display()
                        )))
                    }
                } as u32;
                if d >= l {
                    return Err(CoreError::Format(format!(
                        "digit {d} out of range for l = {l}"
                    )));
                }
                v = v * l + d;
            }
            levels[level].push(v);
        }
    }
    Ok(levels)
}

/// Write an 8-bit grayscale raster as PGM: P5 (binary) or P2 (ASCII).
/// `pixels` is row-major, `height` rows of `width` bytes.
pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8], binary: bool) -> Result<()> {
    if width == 0 || height == 0 || pixels.len() != width * height {
        return Err(CoreError::invalid(format!(
            "pixel buffer {} does not match {width}x{height}",
            pixels.len()
        )));
    }
    let f = File::create(path)?;
    let mut w = BufWriter::new(f);
    if binary {
        write!(w, "P5\n{width} {height}\n255\n")?;
        w.write_all(pixels)?;
    } else {
        write!(w, "P2\n{width} {height}\n255\n")?;
        for row in pixels.chunks(width) {
            let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a P2 or P5 PGM with maxval <= 255; returns (width, height, pixels).
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let f = File::open(path)?;
    let mut r = BufReader::new(f);
    let mut magic = [0u8; 2];
    r.read_exact(&mut magic)?;
    let binary = match &magic {
        b"P5" => true,
        b"P2" => false,
        _ => return Err(CoreError::Format(format!("not a PGM: {}", path.display()))),
    };
    // Header tokens: width, height, maxval; '#' comments run to end of line.
    let mut tokens = Vec::with_capacity(3);
    let mut token = String::new();
    while tokens.len() < 3 {
        let mut byte = [0u8; 1];
        r.read_exact(&mut byte)?;
        match byte[0] {
            b'#' => {
                let mut skip = String::new();
                r.read_line(&mut skip)?;
            }
            b if b.is_ascii_whitespace() => {
                if !token.is_empty() {
                    tokens.push(std::mem::take(&mut token));
                }
            }
            b => token.push(b as char),
        }
    }
    let width: usize = tokens[0]
        .parse()
        .map_err(|_| CoreError::Format("bad PGM width".into()))?;
    let height: usize = tokens[1]
        .parse()
        .map_err(|_| CoreError::Format("bad PGM height".into()))?;
    let maxval: u32 = tokens[2]
        .parse()
        .map_err(|_| CoreError::Format("bad PGM maxval".into()))?;
    if maxval == 0 || maxval > 255 {
        return Err(CoreError::Format(format!("unsupported PGM maxval {maxval}")));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| CoreError::Format("PGM dimensions overflow".into()))?;
    let mut pixels = Vec::with_capacity(count);
    if binary {
        pixels.resize(count, 0);
        r.read_exact(&mut pixels)?;
    } else {
        let mut body = String::new();
        r.read_to_string(&mut body)?;
        for tok in body.split_ascii_whitespace() {
            let v: u32 = tok
                .parse()
                .map_err(|_| CoreError::Format("bad PGM sample".into()))?;
            if v > maxval {
                return Err(CoreError::Format("PGM sample exceeds maxval".into()));
            }
            pixels.push(v as u8);
        }
        if pixels.len() != count {
            return Err(CoreError::Format(format!(
                "PGM has {} samples, expected {count}",
                pixels.len()
            )));
        }
    }
    Ok((width, height, pixels))
}

/// Raster the deepest level of a percolation tree to PGM: 255 = kept,
/// 0 = removed. `binary` selects P5 over P2. For n = 1 the image is one row;
/// for n = 3 the z-slices are stacked vertically (height = side²); n >= 4 is
/// not exportable.
pub fn write_perc_pgm(path: &Path, tree: &PercTree, binary: bool) -> Result<()> {
    let n = tree.n();
    if n > 3 {
        return Err(CoreError::invalid("raster export supports n <= 3 only"));
    }
    let side = (tree.l() as u64).pow(tree.depth());
    if side > 4096 {
        return Err(CoreError::capacity(format!(
            "raster side l^depth = {side} exceeds 4096"
        )));
    }
    let side = side as usize;
    let (width, height) = match n {
        1 => (side, 1),
        2 => (side, side),
        _ => (side, side * side),
    };
    if width * height > (1usize << 24) {
        return Err(CoreError::capacity("raster exceeds 16M pixels"));
    }
    let mut pixels = vec![0u8; width * height];
    let k = tree.depth();
    for i in 0..tree.count(k) {
        let c = tree.cell(k, i);
        // Row-major with x = axis 0 as column, axis 1 as row, axis 2 as slice.
        let idx = match n {
            1 => c[0] as usize,
            2 => c[1] as usize * side + c[0] as usize,
            _ => (c[2] as usize * side + c[1] as usize) * side + c[0] as usize,
        };
        pixels[idx] = 255;
    }
    write_pgm(path, width, height, &pixels, binary)
}

/// Serialize any report type to pretty JSON (trailing newline included).
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = File::create(path)?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| CoreError::Format(format!("json serialization failed: {e}")))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Parse a JSON file into a dynamic value (used by tests and the harness to
/// inspect artifacts).
pub fn read_json(path: &Path) -> Result<serde_json::Value> {
    let f = File::open(path)?;
    serde_json::from_reader(BufReader::new(f))
        .map_err(|e| CoreError::Format(format!("json parse failed: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::percolation::sample_percolation;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("fractal-core-io-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn points_roundtrip_with_and_without_times() {
        let c = PolyCurve::new(
            2,
            vec![0.0, 1.5, -2.25, 1e-9, 0.1, 7.0],
            Some(vec![0.0, 0.5, 2.0]),
        )
        .unwrap();
        let p = tmp("pts_t.csv");
        write_points_csv(&p, &c).unwrap();
        let back = read_points_csv(&p).unwrap();
        assert_eq!(back.coords(), c.coords());
        assert_eq!(back.times(), c.times());

        let c2 = PolyCurve::from_values1(&[0.25, 0.5, 0.125], None).unwrap();
        let p2 = tmp("pts_plain.csv");
        write_points_csv(&p2, &c2).unwrap();
        let back2 = read_points_csv(&p2).unwrap();
        assert_eq!(back2.coords(), c2.coords());
        assert!(back2.times().is_none());
    }

    #[test]
    fn driver_roundtrip() {
        let t = vec![0.0, 0.1, 0.2];
        let w = vec![0.5, -0.25, 0.75];
        let v = vec![1.0, 1.125, 1.25];
        let p = tmp("driver.csv");
        write_driver_csv(&p, &t, &w, Some(&v)).unwrap();
        let (t2, w2, v2) = read_driver_csv(&p).unwrap();
        assert_eq!(t2, t);
        assert_eq!(w2, w);
        assert_eq!(v2, Some(v));

        write_driver_csv(&p, &t, &w, None).unwrap();
        let (_, _, v3) = read_driver_csv(&p).unwrap();
        assert!(v3.is_none());
        assert!(write_driver_csv(&p, &t, &w[..2], None).is_err());
    }

    #[test]
    fn multi_polyline_roundtrip() {
        let a = vec![0.0, 0.0, 1.0, 0.5, 0.25, -1.0];
        let b = vec![2.0, 2.0, 3.0, 3.0];
        let p = tmp("loops.csv");
        write_multi_polyline_csv(&p, &[&a, &b]).unwrap();
        let back = read_multi_polyline_csv(&p).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn perc_csv_roundtrip() {
        let t = sample_percolation(2, 3, 0.7, 4, 5).unwrap();
        let p = tmp("perc.csv");
        write_perc_csv(&p, &t).unwrap();
        let levels = read_perc_csv(&p, 2, 3).unwrap();
        let rebuilt = crate::percolation::PercTree::from_levels(2, 3, 0.7, levels, 5).unwrap();
        for k in 0..=4u32 {
            assert_eq!(rebuilt.level_cells(k), t.level_cells(k));
        }
    }

    #[test]
    fn pgm_roundtrip_p2_and_p5() {
        let pixels: Vec<u8> = (0..12).map(|i| (i * 20) as u8).collect();
        for binary in [true, false] {
            let p = tmp(if binary { "img.p5.pgm" } else { "img.p2.pgm" });
            write_pgm(&p, 4, 3, &pixels, binary).unwrap();
            let (w, h, back) = read_pgm(&p).unwrap();
            assert_eq!((w, h), (4, 3));
            assert_eq!(back, pixels);
        }
        assert!(write_pgm(&tmp("bad.pgm"), 2, 2, &[0u8; 3], true).is_err());
    }

    #[test]
    fn perc_raster_marks_kept_cells() {
        let t = sample_percolation(2, 3, 0.5, 3, 9).unwrap();
        let p = tmp("perc.pgm");
        write_perc_pgm(&p, &t, true).unwrap();
        let (w, h, pixels) = read_pgm(&p).unwrap();
        assert_eq!((w, h), (27, 27));
        let kept: usize = pixels.iter().filter(|&&v| v == 255).count();
        assert_eq!(kept, t.count(3));
        for i in 0..t.count(3) {
            let c = t.cell(3, i);
            assert_eq!(pixels[c[1] as usize * 27 + c[0] as usize], 255);
        }
        // n = 4 refuses.
        let t4 = sample_percolation(4, 2, 0.3, 2, 1).unwrap();
        assert!(write_perc_pgm(&tmp("n4.pgm"), &t4, true).is_err());
    }

    #[test]
    fn json_roundtrip() {
        #[derive(Serialize)]
        struct R {
            a: f64,
            b: Vec<u32>,
        }
        let p = tmp("rec.json");
        write_json(&p, &R { a: 0.5, b: vec![1, 2] }).unwrap();
        let v = read_json(&p).unwrap();
        assert_eq!(v["a"], 0.5);
        assert_eq!(v["b"][1], 2);
    }
}
