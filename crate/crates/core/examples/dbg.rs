fn weighted_line(points: &[(f64, f64)], weights: Option<&[f64]>) -> Option<(f64, f64)> {
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let (mut sw, mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, &(t, y)) in points.iter().enumerate() {
        let wi = w(i);
        sw += wi; st += wi * t; sy += wi * y; stt += wi * t * t; sty += wi * t * y;
    }
    let det = sw * stt - st * st;
    println!("  det {det}");
    if det.abs() < 1e-12 * sw.max(1.0) * stt.max(1.0) { return None; }
    Some(((sw * sty - st * sy) / det, (stt * sy - st * sty) / det))
}
fn main() {
    let pts = [(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 100.0)];
    let p = 1.0;
    let objective = |a: f64, b: f64| -> f64 { pts.iter().map(|&(t, y)| (y - a * t - b).abs().powf(p)).sum() };
    let (mut a, mut b) = weighted_line(&pts, None).unwrap();
    println!("OLS ({a}, {b}) obj {}", objective(a, b));
    for it in 0..10 {
        let w: Vec<f64> = pts.iter().map(|&(t, y)| (y - a * t - b).abs().max(1e-6).powf(p - 2.0)).collect();
        println!("iter {it} weights {w:?}");
        let (na, nb) = weighted_line(&pts, Some(&w)).unwrap();
        println!("iter {it}: ({na}, {nb}) obj {}", objective(na, nb));
        a = na; b = nb;
    }
}
