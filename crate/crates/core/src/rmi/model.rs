use crate::dataset::Key;

/// `position ≈ slope * key + intercept`, positions in array-index units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearModel {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearModel {
    pub const SIZE_BYTES: usize = 16;

    #[inline]
    pub fn predict(&self, key: Key) -> f64 {
        self.slope * key as f64 + self.intercept
    }
}

/// Degree-3 polynomial over keys mapped affinely onto `[0, 1]`.
///
/// Keys outside the fitted range are clamped to the ends of the unit
/// interval, so a model that is non-decreasing on `[0, 1]` is non-decreasing
/// over the whole key space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub key_min: Key,
    pub inv_range: f64,
}

impl CubicModel {
    /// Four coefficients plus the two normalization parameters.
    pub const SIZE_BYTES: usize = 48;

    #[inline]
    pub fn normalize(&self, key: Key) -> f64 {
        (key.saturating_sub(self.key_min) as f64 * self.inv_range).min(1.0)
    }

    #[inline]
    pub fn predict(&self, key: Key) -> f64 {
        let t = self.normalize(key);
        ((self.a * t + self.b) * t + self.c) * t + self.d
    }

    /// Minimum of the derivative `3a t² + 2b t + c` over `[0, 1]`.
    ///
    /// Since `t` spans a unit interval, a negative value also bounds how far
    /// the polynomial can ever decrease.
    pub fn min_slope(&self) -> f64 {
        let deriv = |t: f64| (3.0 * self.a * t + 2.0 * self.b) * t + self.c;
        let mut min = deriv(0.0).min(deriv(1.0));
        if self.a != 0.0 {
            let vertex = -self.b / (3.0 * self.a);
            if vertex > 0.0 && vertex < 1.0 {
                min = min.min(deriv(vertex));
            }
        }
        min
    }

    pub fn is_monotone(&self) -> bool {
        self.min_slope() >= 0.0
    }
}

/// Running least-squares accumulator (Welford-style co-moments).
#[derive(Default)]
struct Ols {
    count: f64,
    mean_x: f64,
    mean_y: f64,
    cxx: f64,
    cxy: f64,
}

impl Ols {
    fn push(&mut self, x: f64, y: f64) {
        self.count += 1.0;
        let dx = x - self.mean_x;
        self.mean_x += dx / self.count;
        self.mean_y += (y - self.mean_y) / self.count;
        self.cxx += dx * (x - self.mean_x);
        self.cxy += dx * (y - self.mean_y);
    }

    fn line(&self) -> (f64, f64) {
        let slope = if self.cxx > 0.0 {
            self.cxy / self.cxx
        } else {
            0.0
        };
        (slope, self.mean_y - slope * self.mean_x)
    }
}

/// Ordinary least squares over `(key, position)` pairs.
///
/// A single point (or any set with one distinct key) yields slope 0 through
/// the mean position. An empty input yields the zero model.
pub fn fit_linear<I>(points: I) -> LinearModel
where
    I: IntoIterator<Item = (Key, f64)>,
{
    let mut ols = Ols::default();
    for (k, y) in points {
        ols.push(k as f64, y);
    }
    let (slope, intercept) = ols.line();
    LinearModel { slope, intercept }
}

/// Least-squares cubic on normalized keys; fewer than four points fall back to
/// the linear fit embedded with `a = b = 0`.
pub fn fit_cubic(points: &[(Key, f64)]) -> CubicModel {
    let (key_min, key_max) = match (points.first(), points.last()) {
        (Some(f), Some(l)) => (
            points.iter().map(|p| p.0).min().unwrap_or(f.0),
            points.iter().map(|p| p.0).max().unwrap_or(l.0),
        ),
        _ => (0, 0),
    };
    let range = key_max - key_min;
    let inv_range = if range == 0 { 1.0 } else { 1.0 / range as f64 };
    let mut model = CubicModel {
        a: 0.0,
        b: 0.0,
        c: 0.0,
        d: 0.0,
        key_min,
        inv_range,
    };
    if points.len() >= 4 && range > 0 {
        if let Some([d, c, b, a]) = solve_cubic_normal_equations(points, &model) {
            model.a = a;
            model.b = b;
            model.c = c;
            model.d = d;
            return model;
        }
    }
    embed_linear(points, model)
}

/// Replaces the polynomial part with the least-squares line over `t`.
pub(crate) fn embed_linear(points: &[(Key, f64)], mut model: CubicModel) -> CubicModel {
    let mut ols = Ols::default();
    for &(k, y) in points {
        ols.push(model.normalize(k), y);
    }
    let (slope, intercept) = ols.line();
    model.a = 0.0;
    model.b = 0.0;
    model.c = slope;
    model.d = intercept;
    model
}

fn solve_cubic_normal_equations(points: &[(Key, f64)], model: &CubicModel) -> Option<[f64; 4]> {
    // Mean-centre positions so the right-hand side stays small.
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let mut moments = [0.0f64; 7];
    let mut rhs = [0.0f64; 4];
    for &(k, y) in points {
        let t = model.normalize(k);
        let y = y - y_mean;
        let mut p = 1.0;
        for (i, m) in moments.iter_mut().enumerate() {
            *m += p;
            if i < 4 {
                rhs[i] += p * y;
            }
            p *= t;
        }
    }
    let mut m = [[0.0f64; 5]; 4];
    for (r, row) in m.iter_mut().enumerate() {
        row[..4].copy_from_slice(&moments[r..r + 4]);
        row[4] = rhs[r];
    }
    let mut coef = gauss_solve(m)?;
    coef[0] += y_mean;
    coef.iter().all(|v| v.is_finite()).then_some(coef)
}

/// Gaussian elimination with partial pivoting on an augmented 4x5 matrix.
fn gauss_solve(mut m: [[f64; 5]; 4]) -> Option<[f64; 4]> {
    let scale = m
        .iter()
        .flat_map(|r| r[..4].iter())
        .fold(0.0f64, |a, v| a.max(v.abs()));
    for col in 0..4 {
        let pivot = (col..4).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() <= scale * 1e-14 {
            return None;
        }
        m.swap(col, pivot);
        let pivot_row = m[col];
        for row in m.iter_mut().skip(col + 1) {
            let f = row[col] / pivot_row[col];
            for (v, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *v -= f * p;
            }
        }
    }
    let mut x = [0.0f64; 4];
    for r in (0..4).rev() {
        let mut acc = m[r][4];
        for c in r + 1..4 {
            acc -= m[r][c] * x[c];
        }
        x[r] = acc / m[r][r];
    }
    Some(x)
}
