//! High-precision reference geodesic for tests.
//!
//! Solves the inverse problem on the auxiliary sphere with the longitude
//! and distance integrals evaluated by composite Simpson quadrature rather
//! than by Vincenty's truncated series, so it shares no series
//! coefficients with the implementation under test.

#![allow(dead_code)]

const A: f64 = 6_378_137.0;
const F: f64 = 1.0 / 298.257_223_563;
const B: f64 = A * (1.0 - F);

fn simpson<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64, panels: usize) -> f64 {
    let n = panels * 2;
    let h = (hi - lo) / n as f64;
    let mut acc = g(lo) + g(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * g(lo + h * i as f64);
    }
    acc * h / 3.0
}

/// Geodesic distance in meters between `(lat1, lon1)` and `(lat2, lon2)` in degrees.
pub fn inverse_distance(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    if lat1 == lat2 && lon1 == lon2 {
        return 0.0;
    }
    let ep2 = (A * A - B * B) / (B * B);
    let beta1 = ((1.0 - F) * lat1.to_radians().tan()).atan();
    let beta2 = ((1.0 - F) * lat2.to_radians().tan()).atan();
    let mut dlon = lon2 - lon1;
    if dlon > 180.0 {
        dlon -= 360.0;
    } else if dlon <= -180.0 {
        dlon += 360.0;
    }
    let l = dlon.to_radians();
    let (sb1, cb1) = beta1.sin_cos();
    let (sb2, cb2) = beta2.sin_cos();

    let mut omega = l;
    let mut distance = 0.0;
    for _ in 0..100 {
        let (so, co) = omega.sin_cos();
        let east = cb2 * so;
        let north = cb1 * sb2 - sb1 * cb2 * co;
        let sin_sigma = east.hypot(north);
        let cos_sigma = sb1 * sb2 + cb1 * cb2 * co;
        let sigma = sin_sigma.atan2(cos_sigma);
        let sin_alpha0 = cb1 * cb2 * so / sin_sigma;
        let cos2_alpha0 = 1.0 - sin_alpha0 * sin_alpha0;
        let k2 = ep2 * cos2_alpha0;
        // azimuth at the first point, then arc length from the equator crossing
        let alpha1 = east.atan2(north);
        let sigma1 = sb1.atan2(alpha1.cos() * cb1);
        let sigma2 = sigma1 + sigma;

        let longitude_integral = simpson(
            |s| (2.0 - F) / (1.0 + (1.0 - F) * (1.0 + k2 * s.sin().powi(2)).sqrt()),
            sigma1,
            sigma2,
            1024,
        );
        let next = l + F * sin_alpha0 * longitude_integral;
        distance = B * simpson(|s| (1.0 + k2 * s.sin().powi(2)).sqrt(), sigma1, sigma2, 1024);
        let done = (next - omega).abs() < 1e-15;
        omega = next;
        if done {
            break;
        }
    }
    distance
}
