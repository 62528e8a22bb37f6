//! `grid.bin`: little-endian header, nets and parents per level, then an
//! optional calibration block. The boundary sample is stored as its
//! [`SampleSpec`] and redrawn on load, so a round trip reproduces the grid bit
//! for bit.

use std::io::{Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::system::DyadicSystem;
use super::{build_grid_on, domain_code, DyadicError, DyadicGrid, GridConfig, NetLevel, SampleSpec};
use crate::cvec::CPoint;
use crate::domain::{Domain, DomainSpec};
use crate::sampling::SpherePatch;

pub const GRID_MAGIC: [u8; 4] = *b"DYGR";
pub const GRID_VERSION: u32 = 1;

/// Fitted constants stored next to the nets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridCalibration {
    /// Kube containment radius; ball only.
    pub beta: Option<f64>,
    /// Ball sandwich `(c, C)`.
    pub sandwich: (f64, f64),
    /// Slope of `log |K_j^k|` against `k` over all levels, its standard error
    /// and the value `-(2n + 2) ln s` it should match.
    pub slope: f64,
    pub slope_se: f64,
    pub expected_slope: f64,
}

impl GridCalibration {
    /// Measures every constant; `beta` is taken from the system if already
    /// calibrated.
    pub fn measure(system: &DyadicSystem) -> GridCalibration {
        let fit = system.measure_regression(0..=system.depth());
        GridCalibration {
            beta: system.beta,
            sandwich: system.sandwich_constants(),
            slope: fit.slope,
            slope_se: fit.slope_se,
            expected_slope: fit.expected,
        }
    }
}

pub fn write_grid(grid: &DyadicGrid, calibration: Option<&GridCalibration>, mut w: impl Write) -> Result<(), DyadicError> {
    w.write_all(&GRID_MAGIC)?;
    w.write_u32::<LE>(GRID_VERSION)?;
    let n = grid.n();
    w.write_u32::<LE>(n as u32)?;
    let (code, params) = domain_code(grid.domain.spec());
    w.write_u8(code)?;
    w.write_u32::<LE>(params.len() as u32)?;
    for p in params {
        w.write_f64::<LE>(p)?;
    }
    let c = &grid.config;
    w.write_f64::<LE>(c.s)?;
    w.write_f64::<LE>(c.delta_cal)?;
    w.write_u32::<LE>(c.levels as u32)?;
    w.write_u64::<LE>(c.seed)?;
    w.write_f64::<LE>(c.doubling_cap)?;
    match &grid.sample_spec {
        SampleSpec::Uniform { count, seed } => {
            w.write_u8(0)?;
            w.write_u64::<LE>(*count as u64)?;
            w.write_u64::<LE>(*seed)?;
        }
        SampleSpec::Graded { uniform, patches, seed } => {
            w.write_u8(1)?;
            w.write_u64::<LE>(*uniform as u64)?;
            w.write_u64::<LE>(*seed)?;
            w.write_u32::<LE>(patches.len() as u32)?;
            for (p, count) in patches {
                w.write_f64::<LE>(p.radius)?;
                w.write_f64::<LE>(p.half_angle)?;
                w.write_u64::<LE>(*count as u64)?;
            }
        }
    }
    for level in &grid.levels {
        w.write_u32::<LE>(level.points.len() as u32)?;
        w.write_f64::<LE>(level.radius)?;
        for p in &level.points {
            for x in &p.to_real()[..2 * n] {
                w.write_f64::<LE>(*x)?;
            }
        }
        for &q in &level.parent {
            w.write_u32::<LE>(q)?;
        }
    }
    match calibration {
        None => w.write_u8(0)?,
        Some(c) => {
            w.write_u8(1)?;
            w.write_u8(c.beta.is_some() as u8)?;
            for x in [c.beta.unwrap_or(0.0), c.sandwich.0, c.sandwich.1, c.slope, c.slope_se, c.expected_slope] {
                w.write_f64::<LE>(x)?;
            }
        }
    }
    Ok(())
}

fn bad(msg: impl Into<String>) -> DyadicError {
    DyadicError::Format(msg.into())
}

pub fn read_grid(mut r: impl Read) -> Result<(DyadicGrid, Option<GridCalibration>), DyadicError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != GRID_MAGIC {
        return Err(bad("bad magic"));
    }
    let version = r.read_u32::<LE>()?;
    if version != GRID_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let n = r.read_u32::<LE>()? as usize;
    if n == 0 || n > crate::cvec::MAX_DIM {
        return Err(bad(format!("dimension {n} out of range")));
    }
    let code = r.read_u8()?;
    let np = r.read_u32::<LE>()? as usize;
    if np > 64 {
        return Err(bad("too many domain parameters"));
    }
    let params = (0..np).map(|_| r.read_f64::<LE>()).collect::<Result<Vec<_>, _>>()?;
    let spec = match (code, params.as_slice()) {
        (0, []) => DomainSpec::Ball { n },
        (1, w) if w.len() == n => DomainSpec::Ellipsoid { n, weights: w.to_vec() },
        (2, [eps]) => DomainSpec::PerturbedBall { n, eps: *eps },
        _ => return Err(bad(format!("unknown domain code {code}"))),
    };
    let domain = Domain::new(spec).map_err(|e| bad(e.to_string()))?;
    let config = GridConfig {
        s: r.read_f64::<LE>()?,
        delta_cal: r.read_f64::<LE>()?,
        levels: r.read_u32::<LE>()? as usize,
        seed: r.read_u64::<LE>()?,
        doubling_cap: r.read_f64::<LE>()?,
    };
    let sample_spec = match r.read_u8()? {
        0 => SampleSpec::Uniform { count: r.read_u64::<LE>()? as usize, seed: r.read_u64::<LE>()? },
        1 => {
            let uniform = r.read_u64::<LE>()? as usize;
            let seed = r.read_u64::<LE>()?;
            let count = r.read_u32::<LE>()?;
            let mut patches = Vec::new();
            for _ in 0..count {
                let radius = r.read_f64::<LE>()?;
                let half_angle = r.read_f64::<LE>()?;
                patches.push((SpherePatch { radius, half_angle }, r.read_u64::<LE>()? as usize));
            }
            SampleSpec::Graded { uniform, patches, seed }
        }
        t => return Err(bad(format!("unknown sample tag {t}"))),
    };
    let mut stored = Vec::with_capacity(config.levels + 1);
    let mut buf = vec![0.0; 2 * n];
    for _ in 0..=config.levels {
        let count = r.read_u32::<LE>()? as usize;
        let radius = r.read_f64::<LE>()?;
        let mut points = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_f64_into::<LE>(&mut buf)?;
            points.push(CPoint::from_real_pairs(n, &buf));
        }
        let parent = (0..count).map(|_| r.read_u32::<LE>()).collect::<Result<Vec<_>, _>>()?;
        stored.push(NetLevel { radius, points, parent });
    }
    let calibration = match r.read_u8()? {
        0 => None,
        1 => {
            let has_beta = r.read_u8()? != 0;
            let mut v = [0.0; 6];
            r.read_f64_into::<LE>(&mut v)?;
            Some(GridCalibration {
                beta: has_beta.then_some(v[0]),
                sandwich: (v[1], v[2]),
                slope: v[3],
                slope_se: v[4],
                expected_slope: v[5],
            })
        }
        t => return Err(bad(format!("unknown calibration tag {t}"))),
    };
    let sample = sample_spec.draw(&domain)?;
    let grid = build_grid_on(&domain, config, sample_spec, sample)?;
    if grid.levels != stored {
        return Err(bad("stored nets differ from the rebuilt grid"));
    }
    Ok((grid, calibration))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::build_grid;

    #[test]
    fn round_trip_is_exact() {
        let d = Domain::ball(1);
        let g = build_grid(&d, GridConfig::new(2.0, 0.7, 3, 4), SampleSpec::Uniform { count: 4000, seed: 2 }).unwrap();
        let mut sys = DyadicSystem::new(g.clone());
        sys.calibrate_beta();
        let cal = GridCalibration::measure(&sys);
        for stored in [None, Some(cal)] {
            let mut bytes = Vec::new();
            write_grid(&g, stored.as_ref(), &mut bytes).unwrap();
            let (back, back_cal) = read_grid(bytes.as_slice()).unwrap();
            assert_eq!(back.levels, g.levels);
            assert_eq!(back.cube_of, g.cube_of);
            assert_eq!(back_cal, stored);
            let mut again = Vec::new();
            write_grid(&back, back_cal.as_ref(), &mut again).unwrap();
            assert_eq!(bytes, again);
        }
    }

    #[test]
    fn corrupted_magic_is_rejected() {
        let d = Domain::ball(1);
        let g = build_grid(&d, GridConfig::new(2.0, 0.7, 1, 4), SampleSpec::Uniform { count: 500, seed: 2 }).unwrap();
        let mut bytes = Vec::new();
        write_grid(&g, None, &mut bytes).unwrap();
        bytes[0] = b'X';
        assert!(matches!(read_grid(bytes.as_slice()), Err(DyadicError::Format(_))));
    }
}
