/// Reference-corner signs of the four bilinear nodes, counter-clockwise from `(-1, -1)`.
const CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// Bilinear shape functions and their reference gradients at `(xi, eta)`.
///
/// Inputs outside `[-1, 1]^2` are evaluated as given; no clamping happens here.
pub fn shape_functions(xi: f64, eta: f64) -> ([f64; 4], [[f64; 2]; 4]) {
    let mut n = [0.0; 4];
    let mut dn = [[0.0; 2]; 4];
    for (a, [sx, sy]) in CORNERS.iter().enumerate() {
        let fx = 1.0 + sx * xi;
        let fy = 1.0 + sy * eta;
        n[a] = 0.25 * fx * fy;
        dn[a] = [0.25 * sx * fy, 0.25 * sy * fx];
    }
    (n, dn)
}
