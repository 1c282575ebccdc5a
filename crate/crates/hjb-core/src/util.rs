//! Small shared helpers: least-squares fits and a deterministic scoped-thread
//! map for embarrassingly parallel scans.

/// Least-squares fit of `y = a + b x`; returns (a, b, r2).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return (my, 0.0, 1.0);
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (a, b, r2)
}

/// Slope of the log-log regression of |y| against x (power-law exponent).
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.abs().max(1e-300).ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.abs().max(1e-300).ln()).collect();
    linear_fit(&lx, &ly).1
}

/// Map `f` over `items` with up to `threads` worker threads, preserving
/// order. With `threads <= 1` this is a plain sequential map.
pub fn par_map<T, R, F>(items: Vec<T>, threads: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    if threads <= 1 || items.len() <= 1 {
        return items.into_iter().map(f).collect();
    }
    let items: Vec<(usize, T)> = items.into_iter().enumerate().collect();
    let chunk = items.len().div_ceil(threads);
    let mut slots: Vec<Option<R>> = std::iter::repeat_with(|| None).take(items.len()).collect();
    let mut chunks: Vec<Vec<(usize, T)>> = Vec::new();
    {
        let mut it = items.into_iter().peekable();
        while it.peek().is_some() {
            chunks.push(it.by_ref().take(chunk).collect());
        }
    }
    let results: Vec<Vec<(usize, R)>> = std::thread::scope(|s| {
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|ch| {
                s.spawn(|| ch.into_iter().map(|(i, t)| (i, f(t))).collect::<Vec<_>>())
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for group in results {
        for (i, r) in group {
            slots[i] = Some(r);
        }
    }
    slots.into_iter().map(|s| s.unwrap()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        let (a, b, r2) = linear_fit(&xs, &ys);
        assert!((a - 1.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loglog_slope_powerlaw() {
        let xs: Vec<f64> = (1..8).map(|k| 2f64.powi(k)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-2.0)).collect();
        assert!((log_log_slope(&xs, &ys) + 2.0).abs() < 1e-10);
    }

    #[test]
    fn par_map_is_order_stable() {
        let v: Vec<usize> = (0..100).collect();
        let out = par_map(v.clone(), 4, |x| x * x);
        for (i, o) in out.iter().enumerate() {
            assert_eq!(*o, i * i);
        }
        let seq = par_map(v, 1, |x| x * x);
        assert_eq!(seq.len(), 100);
    }
}
