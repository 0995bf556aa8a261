use crate::domain::StockGeometry;
use crate::error::{nonnegative, positive, Error, Result};

/// Rounded shortest-path constant used for field planning.
pub const BHH_ROUNDED: f64 = 0.72;
/// Numerical estimate of the Beardwood-Halton-Hammersley constant in 2-D.
pub const BHH_ASYMPTOTIC: f64 = 0.714;

/// Grams of SOC in the profile: 10⁴ · L · A · μ · d, with μ in %SOC,
/// L in m, A in m² and d in g/cm³.
pub fn stock_from_concentration(geom: &StockGeometry, mu: f64) -> Result<f64> {
    let geom = geom.validate()?;
    nonnegative("mu", mu)?;
    Ok(1e4 * geom.depth_m * geom.area_m2 * mu * geom.bulk_density)
}

/// Expected length in meters of the shortest path through `n` uniformly
/// placed points in a plot of `area_m2`: β√(nA).
pub fn expected_shortest_path(n: u64, area_m2: f64, beta: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::validation("n", "a path needs at least 2 points"));
    }
    positive("area_m2", area_m2)?;
    positive("beta", beta)?;
    Ok(beta * (n as f64 * area_m2).sqrt())
}

/// Upper bound on a straight transect across an `a` × `b` plot: the diagonal.
pub fn transect_length(a: f64, b: f64) -> Result<f64> {
    positive("width_m", a)?;
    positive("height_m", b)?;
    Ok(a.hypot(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn stock_unit_case() {
        let g = StockGeometry::new(0.3, 1.0, 1.0).unwrap();
        assert_relative_eq!(stock_from_concentration(&g, 1.0).unwrap(), 3000.0, max_relative = 1e-12);
        assert_eq!(stock_from_concentration(&g, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn stock_is_linear_in_each_factor() {
        let g = StockGeometry::new(0.1, 4096.0, 1.2).unwrap();
        let base = stock_from_concentration(&g, 3.57).unwrap();
        let twice = |g: StockGeometry, mu: f64| stock_from_concentration(&g, mu).unwrap() / base;
        assert_relative_eq!(twice(StockGeometry { depth_m: 0.2, ..g }, 3.57), 2.0, max_relative = 1e-12);
        assert_relative_eq!(twice(StockGeometry { area_m2: 8192.0, ..g }, 3.57), 2.0, max_relative = 1e-12);
        assert_relative_eq!(twice(StockGeometry { bulk_density: 2.4, ..g }, 3.57), 2.0, max_relative = 1e-12);
        assert_relative_eq!(twice(g, 7.14), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn path_lengths_for_square_plot() {
        let uirs = expected_shortest_path(10, 4096.0, BHH_ROUNDED).unwrap();
        assert!((uirs - 146.0).abs() < 1.0, "{uirs}");
        let asym = expected_shortest_path(10, 4096.0, BHH_ASYMPTOTIC).unwrap();
        assert!(asym < uirs);
        let transect = transect_length(64.0, 64.0).unwrap();
        assert!((transect - 90.5).abs() < 0.05);
        let ratio = transect / uirs;
        assert!((0.60..=0.63).contains(&ratio), "{ratio}");
    }

    #[test]
    fn path_needs_two_points() {
        assert!(expected_shortest_path(1, 100.0, BHH_ROUNDED).is_err());
        assert!(expected_shortest_path(5, 0.0, BHH_ROUNDED).is_err());
    }
}
