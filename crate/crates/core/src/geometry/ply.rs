//! ASCII PLY reader/writer for oriented point clouds (`x y z nx ny nz`, meters).

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use super::cloud::PointCloud;
use crate::error::{Error, Result};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Ply {
        line,
        msg: msg.into(),
    }
}

struct Element {
    name: String,
    count: usize,
    properties: Vec<String>,
}

/// Parse an ASCII PLY document. Normals are renormalized when they are within
/// 1e-3 of unit length (files written with `float` precision); points whose
/// normals are zero or absent are rejected.
pub fn parse_ply(text: &str) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(parse_err(1, "missing 'ply' magic")),
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut saw_format = false;
    loop {
        let (no, line) = lines.next().ok_or_else(|| parse_err(0, "unterminated header"))?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                if tok.next() != Some("ascii") {
                    return Err(parse_err(no, "only ascii PLY is supported"));
                }
                saw_format = true;
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = tok.next().ok_or_else(|| parse_err(no, "element without name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| parse_err(no, "bad element count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(no, "property before element"))?;
                let parts: Vec<&str> = tok.collect();
                let name = match parts.as_slice() {
                    ["list", _, _, name] => name,
                    [_, name] => name,
                    _ => return Err(parse_err(no, "malformed property")),
                };
                el.properties.push(name.to_string());
            }
            Some("end_header") => break,
            Some(other) => return Err(parse_err(no, format!("unknown header keyword '{other}'"))),
        }
    }
    if !saw_format {
        return Err(parse_err(0, "missing format line"));
    }
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut found_vertex = false;
    for el in &elements {
        if el.name != "vertex" {
            for _ in 0..el.count {
                lines
                    .next()
                    .ok_or_else(|| parse_err(0, format!("truncated '{}' element", el.name)))?;
            }
            continue;
        }
        found_vertex = true;
        let col = |name: &str| el.properties.iter().position(|p| p == name);
        let xyz = [col("x"), col("y"), col("z")];
        let nrm = [col("nx"), col("ny"), col("nz")];
        if xyz.iter().any(Option::is_none) || nrm.iter().any(Option::is_none) {
            return Err(parse_err(0, "vertex element needs x, y, z, nx, ny, nz"));
        }
        for _ in 0..el.count {
            let (no, line) = lines.next().ok_or_else(|| parse_err(0, "truncated vertex data"))?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(no, e.to_string()))?;
            if vals.len() != el.properties.len() {
                return Err(parse_err(
                    no,
                    format!("expected {} values, found {}", el.properties.len(), vals.len()),
                ));
            }
            let get = |c: [Option<usize>; 3]| Vector3::new(vals[c[0].unwrap()], vals[c[1].unwrap()], vals[c[2].unwrap()]);
            let p = get(xyz);
            let mut n = get(nrm);
            let len = n.norm();
            if (len - 1.0).abs() > 1e-3 {
                return Err(parse_err(no, format!("normal length {len} is not unit")));
            }
            if (len - 1.0).abs() > super::cloud::NORMAL_TOLERANCE {
                n /= len;
            }
            points.push(p);
            normals.push(n);
        }
    }
    if !found_vertex {
        return Err(parse_err(0, "no vertex element"));
    }
    PointCloud::new(points, normals)
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    parse_ply(&std::fs::read_to_string(path)?)
}

pub fn format_ply(cloud: &PointCloud) -> String {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\ncomment units meters\n");
    let _ = writeln!(out, "element vertex {}", cloud.len());
    for p in ["x", "y", "z", "nx", "ny", "nz"] {
        let _ = writeln!(out, "property double {p}");
    }
    out.push_str("end_header\n");
    for (p, n) in cloud.points().iter().zip(cloud.normals()) {
        let _ = writeln!(out, "{} {} {} {} {} {}", p.x, p.y, p.z, n.x, n.y, n.z);
    }
    out
}

pub fn write_ply(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    std::fs::write(path, format_ply(cloud))?;
    Ok(())
}
