//! WGS84 geodesics (Vincenty direct and inverse) and a local planar frame.
//!
//! Every length in the engine (edge lengths, cookie spacing, catch and
//! pickup radii) is measured with [`vincenty_inverse`]. Projection of a
//! point onto a road polyline is done in a [`LocalFrame`], an
//! equirectangular plane scaled by the ellipsoid's radii of curvature at
//! the frame origin.

use std::fmt;
use std::iter::Sum;
use std::ops::Add;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// WGS84 semi-major axis in meters.
pub const WGS84_A: f64 = 6_378_137.0;
/// WGS84 flattening.
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;
/// WGS84 semi-minor axis in meters.
pub const WGS84_B: f64 = WGS84_A * (1.0 - WGS84_F);

/// Convergence threshold on the longitude difference on the auxiliary sphere.
pub const VINCENTY_TOLERANCE: f64 = 1e-12;
pub const VINCENTY_MAX_ITERATIONS: usize = 200;

/// Largest distance from its origin at which a [`LocalFrame`] accepts points.
pub const MAX_PROJECTION_RANGE_M: f64 = 10_000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeodesyError {
    #[error("invalid coordinate: lat {lat}, lon {lon}")]
    InvalidPoint { lat: f64, lon: f64 },
    #[error("invalid length {0} m (must be finite and non-negative)")]
    InvalidLength(f64),
    #[error("invalid bearing {0} degrees")]
    InvalidBearing(f64),
    #[error("vincenty iteration did not converge after {0} iterations")]
    NonConvergence(usize),
    #[error("point is {distance:.1} m from the projection origin (limit {limit} m)")]
    OutOfProjectionRange { distance: f64, limit: f64 },
}

/// A WGS84 latitude/longitude pair in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint")]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

#[derive(Deserialize)]
struct RawPoint {
    lat: f64,
    lon: f64,
}

impl TryFrom<RawPoint> for GeoPoint {
    type Error = GeodesyError;

    fn try_from(raw: RawPoint) -> Result<Self, Self::Error> {
        GeoPoint::new(raw.lat, raw.lon)
    }
}

impl GeoPoint {
    /// Builds a point, normalizing the longitude into (-180, 180].
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeodesyError> {
        if !lat.is_finite() || !lon.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(GeodesyError::InvalidPoint { lat, lon });
        }
        Ok(GeoPoint {
            lat,
            lon: normalize_lon(lon),
        })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.7}, {:.7})", self.lat, self.lon)
    }
}

fn normalize_lon(lon: f64) -> f64 {
    if lon > -180.0 && lon <= 180.0 {
        return lon;
    }
    let wrapped = (lon + 180.0).rem_euclid(360.0) - 180.0;
    if wrapped == -180.0 {
        180.0
    } else {
        wrapped
    }
}

/// A non-negative, finite length in meters.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Meters(pub(crate) f64);

impl Meters {
    pub const ZERO: Meters = Meters(0.0);

    pub fn new(value: f64) -> Result<Self, GeodesyError> {
        if value.is_finite() && value >= 0.0 {
            Ok(Meters(value))
        } else {
            Err(GeodesyError::InvalidLength(value))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Meters {
    type Error = GeodesyError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Meters::new(value)
    }
}

impl From<Meters> for f64 {
    fn from(m: Meters) -> f64 {
        m.0
    }
}

impl Add for Meters {
    type Output = Meters;

    fn add(self, rhs: Meters) -> Meters {
        Meters(self.0 + rhs.0)
    }
}

impl Sum for Meters {
    fn sum<I: Iterator<Item = Meters>>(iter: I) -> Meters {
        iter.fold(Meters::ZERO, Add::add)
    }
}

impl fmt::Display for Meters {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} m", self.0)
    }
}

/// Geodesic distance between two points on the WGS84 ellipsoid.
///
/// The pair is put in a canonical order before iterating, so the result is
/// bit-identical for `(a, b)` and `(b, a)`.
pub fn vincenty_inverse(a: GeoPoint, b: GeoPoint) -> Result<Meters, GeodesyError> {
    let (p, q) = if (a.lat, a.lon) <= (b.lat, b.lon) {
        (a, b)
    } else {
        (b, a)
    };
    if p == q {
        return Ok(Meters::ZERO);
    }

    let f = WGS84_F;
    let mut dlon = q.lon - p.lon;
    if dlon > 180.0 {
        dlon -= 360.0;
    } else if dlon <= -180.0 {
        dlon += 360.0;
    }
    let l = dlon.to_radians();
    let u1 = ((1.0 - f) * p.lat.to_radians().tan()).atan();
    let u2 = ((1.0 - f) * q.lat.to_radians().tan()).atan();
    let (sin_u1, cos_u1) = u1.sin_cos();
    let (sin_u2, cos_u2) = u2.sin_cos();

    let mut lambda = l;
    for _ in 0..VINCENTY_MAX_ITERATIONS {
        let (sin_lambda, cos_lambda) = lambda.sin_cos();
        let cross = cos_u1 * sin_u2 - sin_u1 * cos_u2 * cos_lambda;
        let sin_sigma = ((cos_u2 * sin_lambda).powi(2) + cross * cross).sqrt();
        if sin_sigma == 0.0 {
            return Ok(Meters::ZERO);
        }
        let cos_sigma = sin_u1 * sin_u2 + cos_u1 * cos_u2 * cos_lambda;
        let sigma = sin_sigma.atan2(cos_sigma);
        let sin_alpha = cos_u1 * cos_u2 * sin_lambda / sin_sigma;
        let cos_sq_alpha = 1.0 - sin_alpha * sin_alpha;
        // equatorial line: cos_sq_alpha = 0
        let cos_2sigma_m = if cos_sq_alpha == 0.0 {
            0.0
        } else {
            cos_sigma - 2.0 * sin_u1 * sin_u2 / cos_sq_alpha
        };
        let c = f / 16.0 * cos_sq_alpha * (4.0 + f * (4.0 - 3.0 * cos_sq_alpha));
        let previous = lambda;
        lambda = l
            + (1.0 - c)
                * f
                * sin_alpha
                * (sigma
                    + c * sin_sigma
                        * (cos_2sigma_m + c * cos_sigma * (-1.0 + 2.0 * cos_2sigma_m.powi(2))));

        if (lambda - previous).abs() <= VINCENTY_TOLERANCE {
            let u_sq = cos_sq_alpha * (WGS84_A.powi(2) - WGS84_B.powi(2)) / WGS84_B.powi(2);
            let big_a =
                1.0 + u_sq / 16384.0 * (4096.0 + u_sq * (-768.0 + u_sq * (320.0 - 175.0 * u_sq)));
            let big_b = u_sq / 1024.0 * (256.0 + u_sq * (-128.0 + u_sq * (74.0 - 47.0 * u_sq)));
            let delta_sigma = big_b
                * sin_sigma
                * (cos_2sigma_m
                    + big_b / 4.0
                        * (cos_sigma * (-1.0 + 2.0 * cos_2sigma_m.powi(2))
                            - big_b / 6.0
                                * cos_2sigma_m
                                * (-3.0 + 4.0 * sin_sigma.powi(2))
                                * (-3.0 + 4.0 * cos_2sigma_m.powi(2))));
            let s = WGS84_B * big_a * (sigma - delta_sigma);
            return Ok(Meters(s.max(0.0)));
        }
    }
    Err(GeodesyError::NonConvergence(VINCENTY_MAX_ITERATIONS))
}

/// Distance in meters for points that are known to be close together.
///
/// Falls back to a great-circle estimate in the (near-antipodal) case where
/// Vincenty's iteration fails; that never happens inside a game space.
pub fn distance(a: GeoPoint, b: GeoPoint) -> f64 {
    match vincenty_inverse(a, b) {
        Ok(d) => d.0,
        Err(_) => great_circle(a, b),
    }
}

fn great_circle(a: GeoPoint, b: GeoPoint) -> f64 {
    let mean_radius = (2.0 * WGS84_A + WGS84_B) / 3.0;
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * mean_radius * h.sqrt().min(1.0).asin()
}

/// Destination reached by travelling `distance` along the geodesic leaving
/// `start` at `bearing` degrees clockwise from north.
pub fn vincenty_direct(
    start: GeoPoint,
    bearing: f64,
    distance: Meters,
) -> Result<GeoPoint, GeodesyError> {
    if !bearing.is_finite() || !(0.0..360.0).contains(&bearing) {
        return Err(GeodesyError::InvalidBearing(bearing));
    }
    if distance.0 == 0.0 {
        return Ok(start);
    }

    let f = WGS84_F;
    let alpha1 = bearing.to_radians();
    let (sin_alpha1, cos_alpha1) = alpha1.sin_cos();
    let tan_u1 = (1.0 - f) * start.lat.to_radians().tan();
    let cos_u1 = 1.0 / (1.0 + tan_u1 * tan_u1).sqrt();
    let sin_u1 = tan_u1 * cos_u1;
    let sigma1 = tan_u1.atan2(cos_alpha1);
    let sin_alpha = cos_u1 * sin_alpha1;
    let cos_sq_alpha = 1.0 - sin_alpha * sin_alpha;
    let u_sq = cos_sq_alpha * (WGS84_A.powi(2) - WGS84_B.powi(2)) / WGS84_B.powi(2);
    let big_a = 1.0 + u_sq / 16384.0 * (4096.0 + u_sq * (-768.0 + u_sq * (320.0 - 175.0 * u_sq)));
    let big_b = u_sq / 1024.0 * (256.0 + u_sq * (-128.0 + u_sq * (74.0 - 47.0 * u_sq)));

    let base = distance.0 / (WGS84_B * big_a);
    let mut sigma = base;
    let mut converged = false;
    for _ in 0..VINCENTY_MAX_ITERATIONS {
        let cos_2sigma_m = (2.0 * sigma1 + sigma).cos();
        let (sin_sigma, cos_sigma) = sigma.sin_cos();
        let delta_sigma = big_b
            * sin_sigma
            * (cos_2sigma_m
                + big_b / 4.0
                    * (cos_sigma * (-1.0 + 2.0 * cos_2sigma_m.powi(2))
                        - big_b / 6.0
                            * cos_2sigma_m
                            * (-3.0 + 4.0 * sin_sigma.powi(2))
                            * (-3.0 + 4.0 * cos_2sigma_m.powi(2))));
        let previous = sigma;
        sigma = base + delta_sigma;
        if (sigma - previous).abs() <= VINCENTY_TOLERANCE {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(GeodesyError::NonConvergence(VINCENTY_MAX_ITERATIONS));
    }
    let cos_2sigma_m = (2.0 * sigma1 + sigma).cos();
    let (sin_sigma, cos_sigma) = sigma.sin_cos();

    let tmp = sin_u1 * sin_sigma - cos_u1 * cos_sigma * cos_alpha1;
    let lat2 = (sin_u1 * cos_sigma + cos_u1 * sin_sigma * cos_alpha1)
        .atan2((1.0 - f) * (sin_alpha * sin_alpha + tmp * tmp).sqrt());
    let lambda =
        (sin_sigma * sin_alpha1).atan2(cos_u1 * cos_sigma - sin_u1 * sin_sigma * cos_alpha1);
    let c = f / 16.0 * cos_sq_alpha * (4.0 + f * (4.0 - 3.0 * cos_sq_alpha));
    let l = lambda
        - (1.0 - c)
            * f
            * sin_alpha
            * (sigma
                + c * sin_sigma
                    * (cos_2sigma_m + c * cos_sigma * (-1.0 + 2.0 * cos_2sigma_m.powi(2))));
    GeoPoint::new(lat2.to_degrees(), start.lon + l.to_degrees())
}

/// Planar coordinates in meters east (`x`) and north (`y`) of `origin`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalXY {
    pub x: f64,
    pub y: f64,
    pub origin: GeoPoint,
}

/// Equirectangular projection about a fixed origin.
///
/// Degrees of latitude are scaled by the meridional radius of curvature at
/// the origin and degrees of longitude by the prime-vertical radius times
/// `cos(lat)`, so the frame is locally isometric with the ellipsoid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalFrame {
    origin: GeoPoint,
    meters_per_rad_lat: f64,
    meters_per_rad_lon: f64,
}

impl LocalFrame {
    pub fn new(origin: GeoPoint) -> Self {
        let e2 = WGS84_F * (2.0 - WGS84_F);
        let phi = origin.lat.to_radians();
        let w2 = 1.0 - e2 * phi.sin().powi(2);
        let meridional = WGS84_A * (1.0 - e2) / w2.powf(1.5);
        let prime_vertical = WGS84_A / w2.sqrt();
        LocalFrame {
            origin,
            meters_per_rad_lat: meridional,
            meters_per_rad_lon: prime_vertical * phi.cos(),
        }
    }

    pub fn origin(&self) -> GeoPoint {
        self.origin
    }

    /// Projects without a range check; for internal geometry where callers
    /// already know the point is near the origin.
    pub fn project(&self, p: GeoPoint) -> (f64, f64) {
        let mut dlon = p.lon - self.origin.lon;
        if dlon > 180.0 {
            dlon -= 360.0;
        } else if dlon <= -180.0 {
            dlon += 360.0;
        }
        (
            dlon.to_radians() * self.meters_per_rad_lon,
            (p.lat - self.origin.lat).to_radians() * self.meters_per_rad_lat,
        )
    }

    pub fn unproject(&self, x: f64, y: f64) -> GeoPoint {
        let lat = (self.origin.lat + (y / self.meters_per_rad_lat).to_degrees()).clamp(-90.0, 90.0);
        let lon = self.origin.lon + (x / self.meters_per_rad_lon).to_degrees();
        GeoPoint {
            lat,
            lon: normalize_lon(lon),
        }
    }
}

/// Projects `p` into the planar frame centered on `origin`.
pub fn to_local(p: GeoPoint, origin: GeoPoint) -> Result<LocalXY, GeodesyError> {
    let (x, y) = LocalFrame::new(origin).project(p);
    check_range(x, y)?;
    Ok(LocalXY { x, y, origin })
}

pub fn from_local(xy: LocalXY) -> Result<GeoPoint, GeodesyError> {
    check_range(xy.x, xy.y)?;
    Ok(LocalFrame::new(xy.origin).unproject(xy.x, xy.y))
}

fn check_range(x: f64, y: f64) -> Result<(), GeodesyError> {
    let d = x.hypot(y);
    if d.is_finite() && d <= MAX_PROJECTION_RANGE_M {
        Ok(())
    } else {
        Err(GeodesyError::OutOfProjectionRange {
            distance: d,
            limit: MAX_PROJECTION_RANGE_M,
        })
    }
}

/// Geodesic lengths of consecutive polyline segments.
pub fn segment_lengths(points: &[GeoPoint]) -> Vec<f64> {
    points.windows(2).map(|w| distance(w[0], w[1])).collect()
}

pub fn polyline_length(points: &[GeoPoint]) -> Meters {
    Meters(segment_lengths(points).iter().sum())
}

/// Point at arc length `offset` along a polyline, given its segment lengths.
///
/// Within a segment the position is interpolated linearly in a local frame
/// at the segment start. Offsets outside `[0, total]` are clamped.
pub fn point_along(points: &[GeoPoint], seg_lengths: &[f64], offset: f64) -> GeoPoint {
    debug_assert_eq!(points.len(), seg_lengths.len() + 1);
    let mut remaining = offset.max(0.0);
    for (i, &len) in seg_lengths.iter().enumerate() {
        if remaining <= len {
            if len == 0.0 {
                return points[i];
            }
            return lerp(points[i], points[i + 1], remaining / len);
        }
        remaining -= len;
    }
    *points.last().expect("polyline has at least one point")
}

/// Linear interpolation in the tangent plane at `a`; `t` in [0, 1].
pub fn lerp(a: GeoPoint, b: GeoPoint, t: f64) -> GeoPoint {
    if t <= 0.0 {
        return a;
    }
    if t >= 1.0 {
        return b;
    }
    let frame = LocalFrame::new(a);
    let (x, y) = frame.project(b);
    frame.unproject(x * t, y * t)
}
