//! Dataset ingestion, the STKDE1 volume container, and stats output.

pub mod synth;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{next_up, GridSpec, Point};
use crate::stats::RunStats;
use crate::volume::DensityVolume;

/// Out-of-domain handling while loading points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OobPolicy {
    /// Drop the point and count it.
    Skip,
    /// Fail the load with the offending line number.
    Fail,
}

/// Parses a 3-column `x,y,t` CSV, order-preserving. A single leading header
/// line is skipped when its first field does not parse as a number.
pub fn read_points_csv(path: impl AsRef<Path>) -> Result<Vec<Point>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut points = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let first_numeric = fields[0].parse::<f64>().is_ok();
        if lineno == 1 && !first_numeric {
            continue; // header
        }
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                reason: format!("expected 3 comma-separated fields, got {}", fields.len()),
            });
        }
        let mut vals = [0.0_f64; 3];
        for (i, f) in fields.iter().enumerate() {
            vals[i] = f.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno,
                reason: format!("field {} ({f:?}) is not a number", i + 1),
            })?;
        }
        let p = Point::new(vals[0], vals[1], vals[2]).map_err(|_| Error::Parse {
            line: lineno,
            reason: "non-finite coordinate".to_string(),
        })?;
        points.push(p);
    }
    Ok(points)
}

/// Applies the out-of-domain policy, preserving input order. Returns the
/// accepted points and the skipped count.
pub fn filter_domain(
    points: Vec<Point>,
    grid: &GridSpec,
    policy: OobPolicy,
) -> Result<(Vec<Point>, usize)> {
    let mut accepted = Vec::with_capacity(points.len());
    let mut skipped = 0;
    for (i, p) in points.into_iter().enumerate() {
        if grid.contains(&p) {
            accepted.push(p);
        } else {
            match policy {
                OobPolicy::Skip => skipped += 1,
                OobPolicy::Fail => {
                    return Err(Error::OutOfDomain { x: p.x, y: p.y, t: p.t, line: Some(i + 1) })
                }
            }
        }
    }
    Ok((accepted, skipped))
}

/// CSV load with domain filtering in one step.
pub fn load_points_csv(
    path: impl AsRef<Path>,
    grid: &GridSpec,
    policy: OobPolicy,
) -> Result<(Vec<Point>, usize)> {
    filter_domain(read_points_csv(path)?, grid, policy)
}

/// Tight bounding box of a point set, `None` when empty.
pub fn bounding_box(points: &[Point]) -> Option<((f64, f64, f64), (f64, f64, f64))> {
    let first = points.first()?;
    let mut lo = (first.x, first.y, first.t);
    let mut hi = lo;
    for p in points {
        lo = (lo.0.min(p.x), lo.1.min(p.y), lo.2.min(p.t));
        hi = (hi.0.max(p.x), hi.1.max(p.y), hi.2.max(p.t));
    }
    Some((lo, hi))
}

/// Extent that keeps `max` strictly inside the half-open domain
/// `[min, min + extent)`: the tight width padded up by representable steps
/// until `min + extent > max`. Degenerate (`max == min`) inputs still get a
/// positive extent.
pub fn pad_extent(min: f64, max: f64) -> f64 {
    debug_assert!(max >= min);
    let mut ext = next_up(max - min);
    if ext <= 0.0 {
        ext = f64::MIN_POSITIVE;
    }
    while min + ext <= max {
        ext = next_up(ext);
    }
    ext
}

const VOLUME_MAGIC: &str = "STKDE1";

/// Writes the STKDE1 container: five ASCII header lines (magic, voxel
/// counts, resolutions, origin, bandwidths), a blank separator line, then
/// the values as little-endian f64 in t-innermost layout. Floats are
/// formatted shortest-round-trip, so the header is bit-faithful.
pub fn write_volume(volume: &DensityVolume, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(bad) = volume.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Format(format!("non-finite density at linear index {bad}")));
    }
    let g = &volume.grid;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header = format!(
        "{VOLUME_MAGIC}\n{} {} {}\n{} {}\n{} {} {}\n{} {}\n\n",
        g.nx, g.ny, g.nt, g.sres, g.tres, g.origin.0, g.origin.1, g.origin.2, g.hs, g.ht,
    );
    w.write_all(header.as_bytes()).map_err(|e| Error::io(path, e))?;
    for v in &volume.values {
        w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn header_line<'a>(rest: &mut &'a [u8], what: &str) -> Result<&'a str> {
    let pos = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format(format!("truncated header: missing {what}")))?;
    let (line, tail) = rest.split_at(pos);
    *rest = &tail[1..];
    std::str::from_utf8(line)
        .map_err(|_| Error::Format(format!("non-ASCII bytes in {what}")))
        .map(str::trim)
}

fn parse_fields<const N: usize>(line: &str, what: &str) -> Result<[f64; N]> {
    let mut out = [0.0; N];
    let mut it = line.split_whitespace();
    for slot in out.iter_mut() {
        *slot = it
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| Error::Format(format!("bad {what} line: {line:?}")))?;
    }
    if it.next().is_some() {
        return Err(Error::Format(format!("bad {what} line: {line:?}")));
    }
    Ok(out)
}

/// Reads an STKDE1 file. The grid is reconstructed with the canonical
/// covering extent (voxel count times resolution per axis).
pub fn read_volume(path: impl AsRef<Path>) -> Result<DensityVolume> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut rest = bytes.as_slice();

    let magic = header_line(&mut rest, "magic")?;
    if magic != VOLUME_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let dims: [f64; 3] = parse_fields(header_line(&mut rest, "dimensions")?, "dimensions")?;
    let res: [f64; 2] = parse_fields(header_line(&mut rest, "resolutions")?, "resolutions")?;
    let origin: [f64; 3] = parse_fields(header_line(&mut rest, "origin")?, "origin")?;
    let bw: [f64; 2] = parse_fields(header_line(&mut rest, "bandwidths")?, "bandwidths")?;
    let blank = header_line(&mut rest, "separator")?;
    if !blank.is_empty() {
        return Err(Error::Format("missing blank separator line".to_string()));
    }
    if dims.iter().any(|&d| d < 1.0 || d.fract() != 0.0 || d > 1e9) {
        return Err(Error::Format(format!("bad voxel counts {dims:?}")));
    }
    let (nx, ny, nt) = (dims[0] as usize, dims[1] as usize, dims[2] as usize);
    let grid = GridSpec::new(
        (origin[0], origin[1], origin[2]),
        (nx as f64 * res[0], ny as f64 * res[0], nt as f64 * res[1]),
        res[0],
        res[1],
        bw[0],
        bw[1],
    )
    .map_err(|e| Error::Format(format!("inconsistent header: {e}")))?;
    debug_assert_eq!((grid.nx, grid.ny, grid.nt), (nx, ny, nt));

    let expected = nx * ny * nt * 8;
    if rest.len() < expected {
        return Err(Error::Format(format!(
            "truncated payload: expected {expected} bytes, found {}",
            rest.len()
        )));
    }
    if rest.len() > expected {
        return Err(Error::Format(format!(
            "header/payload size mismatch: expected {expected} bytes, found {}",
            rest.len()
        )));
    }
    let values: Vec<f64> = rest
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks_exact yields 8 bytes")))
        .collect();
    Ok(DensityVolume { grid, values })
}

pub fn write_stats_json(stats: &RunStats, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, stats.to_json()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_tmp(content: &[u8]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content).unwrap();
        f.flush().unwrap();
        f
    }

    fn small_grid() -> GridSpec {
        GridSpec::new((0.0, 0.0, 0.0), (4.0, 4.0, 4.0), 1.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn csv_basic_and_header() {
        let f = write_tmp(b"1.0,2.0,3.0\n");
        let pts = read_points_csv(f.path()).unwrap();
        assert_eq!(pts, vec![Point::new(1.0, 2.0, 3.0).unwrap()]);

        let f = write_tmp(b"x,y,t\n1.0,2.0,3.0\n");
        let pts = read_points_csv(f.path()).unwrap();
        assert_eq!(pts.len(), 1);
    }

    #[test]
    fn csv_parse_error_carries_line_number() {
        let f = write_tmp(b"1.0,abc,3.0\n");
        match read_points_csv(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        let f = write_tmp(b"1.0,2.0,3.0\n4.0,5.0\n");
        match read_points_csv(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn oob_policy() {
        let g = small_grid();
        let pts = vec![
            Point::new(1.0, 1.0, 1.0).unwrap(),
            Point::new(9.0, 1.0, 1.0).unwrap(),
        ];
        let (accepted, skipped) = filter_domain(pts.clone(), &g, OobPolicy::Skip).unwrap();
        assert_eq!((accepted.len(), skipped), (1, 1));
        assert!(matches!(
            filter_domain(pts, &g, OobPolicy::Fail),
            Err(Error::OutOfDomain { line: Some(2), .. })
        ));
    }

    #[test]
    fn pad_extent_keeps_max_inside() {
        for (lo, hi) in [(0.0, 1.0), (-3.5, 7.25), (1e9, 1e9 + 1.0), (2.5, 2.5), (-1e-12, 1e-12)]
        {
            let ext = pad_extent(lo, hi);
            assert!(ext > 0.0);
            assert!(lo + ext > hi, "extent {ext} too tight for [{lo}, {hi}]");
        }
    }

    #[test]
    fn volume_roundtrip_is_bitwise() {
        let g = small_grid();
        let mut vol = DensityVolume::zeroed(g);
        for (i, v) in vol.values.iter_mut().enumerate() {
            *v = (i as f64).sqrt() * 0.125;
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.stkde");
        write_volume(&vol, &path).unwrap();
        let back = read_volume(&path).unwrap();
        assert!(vol.bitwise_eq(&back));
        assert_eq!(back.grid, vol.grid);
    }

    #[test]
    fn volume_roundtrip_canonicalizes_extent() {
        // extent 3.5 at sres 1 covers 4 voxels; the file stores voxel counts,
        // so the reread grid carries the covering extent 4.0.
        let g = GridSpec::new((1.0, 2.0, 3.0), (3.5, 3.5, 3.5), 1.0, 1.0, 1.5, 1.5).unwrap();
        let vol = DensityVolume::zeroed(g);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.stkde");
        write_volume(&vol, &path).unwrap();
        let back = read_volume(&path).unwrap();
        assert!(vol.bitwise_eq(&back));
        assert_eq!((back.grid.nx, back.grid.ny, back.grid.nt), (4, 4, 4));
        assert_eq!(back.grid.extent, (4.0, 4.0, 4.0));
        assert_eq!(back.grid.origin, g.origin);
        assert_eq!((back.grid.hs, back.grid.ht), (g.hs, g.ht));
    }

    #[test]
    fn one_voxel_volume_file_size() {
        let g = GridSpec::new((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), 1.0, 1.0, 1.0, 1.0).unwrap();
        let mut vol = DensityVolume::zeroed(g);
        vol.values[0] = 0.5;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.stkde");
        write_volume(&vol, &path).unwrap();
        let header = "STKDE1\n1 1 1\n1 1\n0 0 0\n1 1\n\n";
        let size = std::fs::metadata(&path).unwrap().len();
        assert_eq!(size, header.len() as u64 + 8);
    }

    #[test]
    fn volume_format_errors() {
        let g = small_grid();
        let vol = DensityVolume::zeroed(g);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.stkde");
        write_volume(&vol, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();

        // Bad magic.
        let mut corrupted = bytes.clone();
        corrupted[4] = b'X';
        let bad = dir.path().join("bad.stkde");
        std::fs::write(&bad, &corrupted).unwrap();
        match read_volume(&bad) {
            Err(Error::Format(msg)) => assert!(msg.contains("bad magic"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }

        // Truncated payload.
        bytes.truncate(bytes.len() - 9);
        std::fs::write(&bad, &bytes).unwrap();
        match read_volume(&bad) {
            Err(Error::Format(msg)) => assert!(msg.contains("truncated"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }

        // Trailing garbage.
        let mut padded = std::fs::read(&path).unwrap();
        padded.extend_from_slice(&[0u8; 4]);
        std::fs::write(&bad, &padded).unwrap();
        match read_volume(&bad) {
            Err(Error::Format(msg)) => assert!(msg.contains("mismatch"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }

        // The writer refuses non-finite densities.
        let mut vol = DensityVolume::zeroed(small_grid());
        vol.values[3] = f64::NAN;
        match write_volume(&vol, dir.path().join("nan.stkde")) {
            Err(Error::Format(msg)) => assert!(msg.contains("non-finite"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
