//! Closed-form response curves for quick what-if sketches.

/// Saturating response `q_max * (1 - exp(-a x))`.
pub fn saturation(q_max: f64, a: f64, x: f64) -> f64 {
    q_max * (1.0 - (-a * x).exp())
}

/// Latency with a paging knee: `l0 + l_page * exp(beta * max(0, (wss - m) / wss))`.
pub fn memory_knee(l0: f64, l_page: f64, beta: f64, wss: f64, m: f64) -> f64 {
    let deficit = ((wss - m) / wss).max(0.0);
    l0 + l_page * (beta * deficit).exp()
}

/// Michaelis-Menten throughput `t_inf * c / (k_half + c)`.
pub fn michaelis_menten(t_inf: f64, k_half: f64, c: f64) -> f64 {
    t_inf * c / (k_half + c)
}
