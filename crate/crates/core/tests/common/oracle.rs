//! Straightforward re-implementation of the 47 swipe features, written
//! against the feature definitions without sharing code with the library.

use touchauth::data::SwipeGesture;

fn pct(values: &[f64], m: f64) -> f64 {
    let mut s = values.to_vec();
    // insertion sort keeps this independent of the library's sorting
    for i in 1..s.len() {
        let mut j = i;
        while j > 0 && s[j - 1] > s[j] {
            s.swap(j - 1, j);
            j -= 1;
        }
    }
    let r = m / 100.0 * (s.len() as f64 - 1.0);
    let lo = r.floor();
    let hi = r.ceil();
    s[lo as usize] + (r - lo) * (s[hi as usize] - s[lo as usize])
}

fn avg(values: &[f64]) -> f64 {
    let mut total = 0.0;
    for v in values {
        total += v;
    }
    total / values.len() as f64
}

fn div0(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

pub fn features(swipe: &SwipeGesture) -> Vec<f64> {
    let xs: Vec<f64> = swipe.events.iter().map(|e| e.x).collect();
    let ys: Vec<f64> = swipe.events.iter().map(|e| e.y).collect();
    let ts: Vec<f64> = swipe.events.iter().map(|e| e.t).collect();
    let n = xs.len();
    let dt_total = ts[n - 1] - ts[0];

    let dx = xs[n - 1] - xs[0];
    let dy = ys[n - 1] - ys[0];
    let dp = (dx * dx + dy * dy).sqrt();
    let mut l = 0.0;
    for i in 1..n {
        l += ((xs[i] - xs[i - 1]).powi(2) + (ys[i] - ys[i - 1]).powi(2)).sqrt();
    }

    // pairwise velocities
    let mut vx = vec![];
    let mut vy = vec![];
    for i in 1..n {
        let d = ts[i] - ts[i - 1];
        vx.push(div0(xs[i] - xs[i - 1], d));
        vy.push(div0(ys[i] - ys[i - 1], d));
    }
    let speed: Vec<f64> = (0..n - 1).map(|i| (vx[i] * vx[i] + vy[i] * vy[i]).sqrt()).collect();
    let (ux, uy) = if dp > 0.0 { (dx / dp, dy / dp) } else { (0.0, 0.0) };
    let along: Vec<f64> = (0..n - 1).map(|i| vx[i] * ux + vy[i] * uy).collect();

    // pairwise accelerations
    let mut ax = vec![];
    let mut ay = vec![];
    for i in 1..n - 1 {
        let d = ts[i + 1] - ts[i];
        ax.push(div0(vx[i] - vx[i - 1], d));
        ay.push(div0(vy[i] - vy[i - 1], d));
    }
    let acc: Vec<f64> = (0..ax.len()).map(|i| (ax[i] * ax[i] + ay[i] * ay[i]).sqrt()).collect();

    // 5% edges
    let mut k = (n as f64 * 0.05).ceil() as usize;
    if k < 2 {
        k = 2;
    }
    let seg_v = |a: usize, b: usize| {
        let ddx = xs[b] - xs[a];
        let ddy = ys[b] - ys[a];
        div0((ddx * ddx + ddy * ddy).sqrt(), ts[b] - ts[a])
    };
    let seg_s = |a: usize, b: usize| {
        let mut len = 0.0;
        for i in a + 1..=b {
            len += ((xs[i] - xs[i - 1]).powi(2) + (ys[i] - ys[i - 1]).powi(2)).sqrt();
        }
        div0(len, ts[b] - ts[a])
    };
    let initial_v = seg_v(0, k - 1);
    let final_v = seg_v(n - k, n - 1);
    let initial_s = seg_s(0, k - 1);
    let final_s = seg_s(n - k, n - 1);
    let mut ka = (acc.len() as f64 * 0.05).ceil() as usize;
    if ka < 1 {
        ka = 1;
    }
    let initial_a = avg(&acc[..ka]);
    let final_a = avg(&acc[acc.len() - ka..]);

    let theta = if dx == 0.0 && dy == 0.0 { 0.0 } else { dx.atan2(dy) };
    let mut area = 0.0;
    for e in &swipe.events {
        area += std::f64::consts::PI * e.a * e.b;
    }
    area /= n as f64;

    let dev: Vec<f64> = if dx == 0.0 {
        xs.iter().map(|x| (x - xs[0]).abs()).collect()
    } else {
        let m = dy / dx;
        let c = ys[0] - m * xs[0];
        (0..n)
            .map(|i| (ys[i] - m * xs[i] - c).abs() / (1.0 + m * m).sqrt())
            .collect()
    };
    let mut max_d = 0.0;
    for &d in &dev {
        if d > max_d {
            max_d = d;
        }
    }

    let q = |s: &[f64]| [pct(s, 25.0), pct(s, 50.0), pct(s, 75.0)];
    let mut f = vec![
        dt_total,
        xs[0],
        ys[0],
        xs[n - 1],
        ys[n - 1],
        dp,
        l,
        dp / dt_total,
        initial_v,
        final_v,
        avg(&speed),
        theta,
        area,
        (final_v - initial_v) / dt_total,
        avg(&acc),
        initial_a,
        final_a,
    ];
    f.extend(q(&acc));
    f.extend(q(&along));
    f.extend([l / dt_total, initial_s, final_s]);
    f.extend(q(&speed));
    f.extend([avg(&vx), avg(&vy), avg(&ax), avg(&ay), avg(&dev), max_d]);
    f.extend(q(&vx));
    f.extend(q(&vy));
    f.extend(q(&ax));
    f.extend(q(&ay));
    f
}
