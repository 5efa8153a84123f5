//! Gridded observations made differentiable by bicubic Hermite
//! interpolation.

use std::collections::BTreeMap;
use std::io::Read;

use crate::error::{Error, Result};
use crate::jet::Jet;

use super::Field;

/// Observations `z` on a regular grid, interpolated bicubically. Node
/// derivatives come from second-order finite differences, so the partials
/// of the interpolant are only as good as the grid; that is the caller's
/// responsibility.
#[derive(Debug, Clone)]
pub struct GridField {
    s0: f64,
    ds: f64,
    ns: usize,
    t0: f64,
    dt: f64,
    nt: usize,
    /// `[z, ∂₁z, ∂₂z, ∂₁∂₂z]` per node, row-major with `t` fastest.
    nodes: Vec<[f64; 4]>,
}

fn axis_slopes(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
            } else if i + 1 == n {
                (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h)
            } else {
                (values[i + 1] - values[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// Hermite basis on `[0,1]` and its derivative: `(v0, v1, w0, w1)` where
/// `v` multiply end values and `w` multiply end slopes.
fn hermite(x: f64) -> ([f64; 4], [f64; 4]) {
    let x2 = x * x;
    let x3 = x2 * x;
    (
        [2.0 * x3 - 3.0 * x2 + 1.0, -2.0 * x3 + 3.0 * x2, x3 - 2.0 * x2 + x, x3 - x2],
        [6.0 * x2 - 6.0 * x, -6.0 * x2 + 6.0 * x, 3.0 * x2 - 4.0 * x + 1.0, 3.0 * x2 - 2.0 * x],
    )
}

impl GridField {
    /// Builds the interpolant from values `z[i·nt + j]` at
    /// `(s0 + i·ds, t0 + j·dt)`.
    pub fn new(s0: f64, ds: f64, ns: usize, t0: f64, dt: f64, nt: usize, z: Vec<f64>) -> Result<Self> {
        if ns < 3 || nt < 3 {
            return Err(Error::Grid("need at least 3 nodes along each axis".into()));
        }
        if !(ds > 0.0 && dt > 0.0) {
            return Err(Error::Grid("grid pitch must be positive".into()));
        }
        if z.len() != ns * nt {
            return Err(Error::Grid(format!("expected {} values, got {}", ns * nt, z.len())));
        }
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::Grid("grid values must be finite".into()));
        }
        let mut zs = vec![0.0; ns * nt];
        let mut zt = vec![0.0; ns * nt];
        let mut zst = vec![0.0; ns * nt];
        for i in 0..ns {
            let row = &z[i * nt..(i + 1) * nt];
            zt[i * nt..(i + 1) * nt].copy_from_slice(&axis_slopes(row, dt));
        }
        for j in 0..nt {
            let col: Vec<f64> = (0..ns).map(|i| z[i * nt + j]).collect();
            let col_t: Vec<f64> = (0..ns).map(|i| zt[i * nt + j]).collect();
            for (i, (a, b)) in axis_slopes(&col, ds)
                .into_iter()
                .zip(axis_slopes(&col_t, ds))
                .enumerate()
            {
                zs[i * nt + j] = a;
                zst[i * nt + j] = b;
            }
        }
        let nodes = (0..ns * nt).map(|i| [z[i], zs[i], zt[i], zst[i]]).collect();
        Ok(Self { s0, ds, ns, t0, dt, nt, nodes })
    }

    /// Reads a CSV with header `s,t,z` describing a complete regular grid.
    /// Row order is free; pitch must be uniform to 1e-9.
    pub fn from_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        if cols != ["s", "t", "z"] {
            return Err(Error::Grid(format!("expected header `s,t,z`, found `{}`", cols.join(","))));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|x| x.parse::<f64>().ok())
                    .ok_or_else(|| Error::Grid(format!("bad number in row {:?}", rec.position().map(|p| p.line()))))
            };
            rows.push((parse(0)?, parse(1)?, parse(2)?));
        }
        if rows.is_empty() {
            return Err(Error::Grid("no data rows".into()));
        }
        let axis = |pick: fn(&(f64, f64, f64)) -> f64| -> Result<(f64, f64, usize)> {
            let mut xs: Vec<f64> = rows.iter().map(pick).collect();
            xs.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
            xs.dedup();
            if xs.len() < 3 {
                return Err(Error::Grid("need at least 3 distinct values per axis".into()));
            }
            let pitch = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
            for (i, x) in xs.iter().enumerate() {
                let expect = xs[0] + pitch * i as f64;
                if (x - expect).abs() > 1e-9 * pitch.max(1.0) {
                    return Err(Error::Grid(format!("non-uniform pitch near {x}")));
                }
            }
            Ok((xs[0], pitch, xs.len()))
        };
        if rows.iter().any(|r| !(r.0.is_finite() && r.1.is_finite())) {
            return Err(Error::Grid("coordinates must be finite".into()));
        }
        let (s0, ds, ns) = axis(|r| r.0)?;
        let (t0, dt, nt) = axis(|r| r.1)?;
        if rows.len() != ns * nt {
            return Err(Error::Grid(format!(
                "{} rows do not form a complete {ns}x{nt} grid",
                rows.len()
            )));
        }
        let mut cells: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (s, t, z) in rows {
            let i = ((s - s0) / ds).round() as usize;
            let j = ((t - t0) / dt).round() as usize;
            if cells.insert((i, j), z).is_some() {
                return Err(Error::Grid(format!("duplicate node ({s}, {t})")));
            }
        }
        let z = cells.into_values().collect();
        Self::new(s0, ds, ns, t0, dt, nt, z)
    }

    pub fn pitch(&self) -> (f64, f64) {
        (self.ds, self.dt)
    }

    pub fn extent(&self) -> ((f64, f64), (f64, f64)) {
        (
            (self.s0, self.s0 + self.ds * (self.ns - 1) as f64),
            (self.t0, self.t0 + self.dt * (self.nt - 1) as f64),
        )
    }

    fn locate(x: f64, x0: f64, h: f64, n: usize) -> Option<(usize, f64)> {
        let r = (x - x0) / h;
        let last = (n - 1) as f64;
        if !(r >= -1e-9 && r <= last + 1e-9) {
            return None;
        }
        let r = r.clamp(0.0, last);
        let i = (r.floor() as usize).min(n - 2);
        Some((i, r - i as f64))
    }
}

impl Field for GridField {
    fn jet(&self, s: f64, t: f64) -> Result<Jet> {
        let (Some((i, x)), Some((j, y))) = (
            Self::locate(s, self.s0, self.ds, self.ns),
            Self::locate(t, self.t0, self.dt, self.nt),
        ) else {
            return Err(Error::Grid(format!("point ({s}, {t}) lies outside the grid")));
        };
        let (hx, dhx) = hermite(x);
        let (hy, dhy) = hermite(y);
        let (ds, dt) = (self.ds, self.dt);
        let mut out = Jet::ZERO;
        for a in 0..2 {
            for b in 0..2 {
                let [z, zs, zt, zst] = self.nodes[(i + a) * self.nt + (j + b)];
                // value/slope weights along s and t, and their derivatives
                let (vs, ws) = (hx[a], ds * hx[2 + a]);
                let (dvs, dws) = (dhx[a] / ds, dhx[2 + a]);
                let (vt, wt) = (hy[b], dt * hy[2 + b]);
                let (dvt, dwt) = (dhy[b] / dt, dhy[2 + b]);
                out.v += vs * vt * z + ws * vt * zs + vs * wt * zt + ws * wt * zst;
                out.d1 += dvs * vt * z + dws * vt * zs + dvs * wt * zt + dws * wt * zst;
                out.d2 += vs * dvt * z + ws * dvt * zs + vs * dwt * zt + ws * dwt * zst;
                out.d12 += dvs * dvt * z + dws * dvt * zs + dvs * dwt * zt + dws * dwt * zst;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(f: impl Fn(f64, f64) -> f64, n: usize) -> GridField {
        let h = 1.0 / (n - 1) as f64;
        let mut z = Vec::new();
        for i in 0..n {
            for j in 0..n {
                z.push(f(1.0 + i as f64 * h, 2.0 + j as f64 * h));
            }
        }
        GridField::new(1.0, h, n, 2.0, h, n, z).unwrap()
    }

    #[test]
    fn reproduces_bilinear_exactly() {
        let g = sample(|s, t| 3.0 + 2.0 * s - t + 0.5 * s * t, 5);
        let j = g.jet(1.37, 2.81).unwrap();
        assert!((j.v - (3.0 + 2.74 - 2.81 + 0.5 * 1.37 * 2.81)).abs() < 1e-12);
        assert!((j.d1 - (2.0 + 0.5 * 2.81)).abs() < 1e-12);
        assert!((j.d2 - (-1.0 + 0.5 * 1.37)).abs() < 1e-12);
        assert!((j.d12 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn smooth_field_converges() {
        let f = |s: f64, t: f64| (s * t).sin();
        let g = sample(f, 201);
        let (s, t) = (1.4321, 2.7777);
        let j = g.jet(s, t).unwrap();
        assert!((j.v - f(s, t)).abs() < 1e-6);
        assert!((j.d1 - t * (s * t).cos()).abs() < 1e-4);
    }

    #[test]
    fn csv_round_trip() {
        let mut text = String::from("s,t,z\n");
        for i in 0..4 {
            for j in 0..3 {
                let (s, t) = (i as f64 * 0.5, 1.0 + j as f64 * 0.25);
                text.push_str(&format!("{s},{t},{}\n", s + 2.0 * t));
            }
        }
        let g = GridField::from_csv(text.as_bytes()).unwrap();
        assert_eq!(g.pitch(), (0.5, 0.25));
        let j = g.jet(0.7, 1.3).unwrap();
        assert!((j.v - (0.7 + 2.6)).abs() < 1e-12);
        assert!(g.jet(1.5, 1.0).is_ok());
        assert!(g.jet(1.6, 1.0).is_err());
    }

    #[test]
    fn csv_errors() {
        assert!(GridField::from_csv("x,y,z\n0,0,0\n".as_bytes()).is_err());
        let ragged = "s,t,z\n0,0,1\n0,1,1\n0,2,1\n1,0,1\n1,1,1\n2,0,1\n2,1,1\n2,2,1\n";
        assert!(GridField::from_csv(ragged.as_bytes()).is_err());
        let uneven = "s,t,z\n0,0,1\n0,1,1\n0,2,1\n1,0,1\n1,1,1\n1,2,1\n2.5,0,1\n2.5,1,1\n2.5,2,1\n";
        assert!(GridField::from_csv(uneven.as_bytes()).is_err());
    }
}
