//! Plain-text import and export of sampled fields and pointwise maps.
//!
//! ```text
//! format field
//! grid fibonacci
//! base_grid_size 512
//! n_t 64
//! radius 1
//! data
//! 0 0 1.0000000000000000e0 0.0000000000000000e0 0.0000000000000000e0
//! ```
//!
//! Explicit grids list one `fiber <index> qw qx qy qz` line per fiber before
//! `data`. Map files use `format map` and rows `fiber_index t_index qw qx qy qz`.
//! Blank lines and lines starting with `#` are ignored.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::aligned::PointwiseMapSample;
use crate::error::GeomError;
use crate::fields::{BaseGrid, GridKind, SampledField};
use crate::quat::{FrameCoeffs, HopfFiber, Quaternion, S3Point};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing header key `{0}`")]
    MissingKey(&'static str),
    #[error("missing row for fiber {fiber}, sample {sample}")]
    MissingRow { fiber: usize, sample: usize },
    #[error(transparent)]
    Geometry(#[from] GeomError),
}

fn syntax(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        message: message.into(),
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_header(out: &mut String, format: &str, grid: &BaseGrid, n_t: usize, radius: Option<f64>) {
    let kind = match grid.kind() {
        GridKind::Fibonacci => "fibonacci",
        GridKind::Explicit => "explicit",
    };
    let _ = writeln!(out, "format {format}");
    let _ = writeln!(out, "grid {kind}");
    let _ = writeln!(out, "base_grid_size {}", grid.len());
    let _ = writeln!(out, "n_t {n_t}");
    if let Some(r) = radius {
        let _ = writeln!(out, "radius {r}");
    }
    if grid.kind() == GridKind::Explicit {
        for (i, f) in grid.fibers().iter().enumerate() {
            let q = f.basepoint().q();
            let _ = writeln!(out, "fiber {i} {} {} {} {}", num(q.w), num(q.x), num(q.y), num(q.z));
        }
    }
    let _ = writeln!(out, "data");
}

pub fn field_to_string(x: &SampledField) -> String {
    let mut out = String::new();
    write_header(&mut out, "field", x.grid(), x.n_t(), Some(x.radius()));
    for i in 0..x.num_fibers() {
        for (k, c) in x.fiber(i).iter().enumerate() {
            let _ = writeln!(out, "{i} {k} {} {} {}", num(c.f), num(c.g), num(c.h));
        }
    }
    out
}

pub fn map_to_string(m: &PointwiseMapSample) -> String {
    let mut out = String::new();
    write_header(&mut out, "map", m.grid(), m.n_t(), None);
    for i in 0..m.grid().len() {
        for k in 0..m.n_t() {
            let q = m.image(i, k).q();
            let _ = writeln!(out, "{i} {k} {} {} {} {}", num(q.w), num(q.x), num(q.y), num(q.z));
        }
    }
    out
}

struct Parsed {
    grid: Arc<BaseGrid>,
    n_t: usize,
    radius: Option<f64>,
    rows: Vec<Vec<f64>>,
}

fn parse_f64(line: usize, s: &str) -> Result<f64, ParseError> {
    let v: f64 = s.parse().map_err(|_| syntax(line, format!("invalid number `{s}`")))?;
    if !v.is_finite() {
        return Err(syntax(line, format!("non-finite number `{s}`")));
    }
    Ok(v)
}

fn parse_usize(line: usize, s: &str) -> Result<usize, ParseError> {
    s.parse().map_err(|_| syntax(line, format!("invalid index `{s}`")))
}

fn parse(text: &str, format: &str, width: usize) -> Result<Parsed, ParseError> {
    let mut header: HashMap<&str, (usize, &str)> = HashMap::new();
    let mut basepoints: Vec<(usize, usize, Quaternion)> = Vec::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut data_line = None;
    for (no, line) in lines.by_ref() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "data" {
            data_line = Some(no);
            break;
        }
        let mut parts = line.split_whitespace();
        let key = parts.next().expect("nonempty line");
        let rest: Vec<&str> = parts.collect();
        if key == "fiber" {
            if rest.len() != 5 {
                return Err(syntax(no, "expected `fiber <index> qw qx qy qz`"));
            }
            let idx = parse_usize(no, rest[0])?;
            let v: Vec<f64> = rest[1..].iter().map(|s| parse_f64(no, s)).collect::<Result<_, _>>()?;
            basepoints.push((no, idx, Quaternion::new(v[0], v[1], v[2], v[3])));
            continue;
        }
        if rest.len() != 1 {
            return Err(syntax(no, format!("expected `{key} <value>`")));
        }
        if header.insert(key, (no, rest[0])).is_some() {
            return Err(syntax(no, format!("duplicate key `{key}`")));
        }
    }
    let Some(data_no) = data_line else {
        return Err(ParseError::MissingKey("data"));
    };
    let get = |k: &'static str| header.get(k).copied().ok_or(ParseError::MissingKey(k));
    let (no, f) = get("format")?;
    if f != format {
        return Err(syntax(no, format!("expected format `{format}`, found `{f}`")));
    }
    let (no, size) = get("base_grid_size")?;
    let size = parse_usize(no, size)?;
    let (no, n_t) = get("n_t")?;
    let n_t = parse_usize(no, n_t)?;
    let radius = match header.get("radius") {
        Some(&(no, r)) => Some(parse_f64(no, r)?),
        None => None,
    };
    let (grid_no, kind) = get("grid")?;
    let grid = match kind {
        "fibonacci" => BaseGrid::fibonacci(size)?,
        "explicit" => {
            let mut fibers = vec![None; size];
            for (no, idx, q) in basepoints {
                let slot = fibers.get_mut(idx).ok_or_else(|| syntax(no, format!("fiber index {idx} out of range")))?;
                let p = S3Point::new(q).map_err(|e| syntax(no, e.to_string()))?;
                *slot = Some(HopfFiber::through(p));
            }
            let fibers: Option<Vec<HopfFiber>> = fibers.into_iter().collect();
            BaseGrid::from_fibers(fibers.ok_or_else(|| syntax(grid_no, "explicit grid is missing fibers"))?)
        }
        other => return Err(syntax(grid_no, format!("unknown grid `{other}`"))),
    };
    if size == 0 || n_t == 0 {
        return Err(syntax(data_no, "empty grid"));
    }
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; size * n_t];
    for (no, line) in lines {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 2 + width {
            return Err(syntax(no, format!("expected {} columns, found {}", 2 + width, parts.len())));
        }
        let (i, k) = (parse_usize(no, parts[0])?, parse_usize(no, parts[1])?);
        if i >= size || k >= n_t {
            return Err(syntax(no, format!("index ({i}, {k}) out of range")));
        }
        let v: Vec<f64> = parts[2..].iter().map(|s| parse_f64(no, s)).collect::<Result<_, _>>()?;
        if rows[i * n_t + k].replace(v).is_some() {
            return Err(syntax(no, format!("duplicate row ({i}, {k})")));
        }
    }
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(j, r)| {
            r.ok_or(ParseError::MissingRow {
                fiber: j / n_t,
                sample: j % n_t,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(Parsed {
        grid: Arc::new(grid),
        n_t,
        radius,
        rows,
    })
}

pub fn parse_field(text: &str) -> Result<SampledField, ParseError> {
    let p = parse(text, "field", 3)?;
    let coeffs = p.rows.iter().map(|r| FrameCoeffs::new(r[0], r[1], r[2])).collect();
    Ok(SampledField::new(p.grid, p.n_t, p.radius.unwrap_or(1.0), coeffs)?)
}

pub fn parse_map(text: &str) -> Result<PointwiseMapSample, ParseError> {
    let p = parse(text, "map", 4)?;
    let images = p
        .rows
        .iter()
        .map(|r| S3Point::new(Quaternion::new(r[0], r[1], r[2], r[3])))
        .collect::<Result<_, _>>()?;
    Ok(PointwiseMapSample::new(p.grid, p.n_t, images)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aligned::{exp_field, Regime};
    use crate::synth::{random_polynomial, SmoothField};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn field(grid: BaseGrid) -> SampledField {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_polynomial(&mut rng, 2, 1.0);
        let x = SampledField::from_fn(Arc::new(grid), 8, 1.0, |p| f.coeffs_at(p)).unwrap();
        x.scale(0.2 / x.sup_norm())
    }

    #[test]
    fn field_round_trip_is_exact() {
        for grid in [
            BaseGrid::fibonacci(5).unwrap(),
            BaseGrid::from_points(&[crate::quat::Vec3::new(0.0, 1.0, 0.0), crate::quat::Vec3::new(0.3, 0.0, -1.0)])
                .unwrap(),
        ] {
            let x = field(grid);
            let back = parse_field(&field_to_string(&x)).unwrap();
            assert_eq!(back, x);
        }
    }

    #[test]
    fn map_round_trip_is_exact() {
        let x = field(BaseGrid::fibonacci(4).unwrap());
        let m = exp_field(&x, &Regime::default()).unwrap();
        assert_eq!(parse_map(&map_to_string(&m)).unwrap(), m);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let good = field_to_string(&field(BaseGrid::fibonacci(2).unwrap()));
        let bad = good.replacen("0 3 ", "0 3 x", 1);
        match parse_field(&bad) {
            Err(ParseError::Syntax { line, .. }) => assert_eq!(line, 10),
            other => panic!("{other:?}"),
        }
        let short: String = good.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(matches!(parse_field(&short), Err(ParseError::MissingRow { .. })));
        assert!(matches!(parse_field("format field\n"), Err(ParseError::MissingKey("data"))));
        assert!(matches!(parse_map(&good), Err(ParseError::Syntax { line: 1, .. })));
    }
}
