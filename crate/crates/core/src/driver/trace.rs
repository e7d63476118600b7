use std::io::{self, Write};

/// Diagnostics for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    /// `β_t`, the penalty used during the round.
    pub beta: f64,
    /// `β_{t+1}` as returned by the oracle.
    pub beta_next: f64,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    /// `‖M̄^{t+1}x_{t+1} − y_{t+1}‖`.
    pub feas: f64,
    /// `L_{β_t}(x_{t+1}, y_{t+1}, z_{t+1}; M̄^{t+1})`.
    pub lagrangian: f64,
    pub sigma_tilde: f64,
    pub zeta: f64,
    pub xi: f64,
    pub zeta_lip: f64,
    pub xi_lip: f64,
    /// `θ_{t+1}`, matrices drawn so far.
    pub samples_total: u64,
    pub r_prox: f64,
    pub r_grad: f64,
    pub r_feas: f64,
    /// `g^{t+1}(x_{t+1}) − g^{t+1}(x_t)`.
    pub g_delta: f64,
    pub rho: Option<f64>,
    pub y_inclusion: f64,
    pub x_stationarity: f64,
    pub z_identity: f64,
    pub dual_gradient: f64,
    pub inner_iterations: usize,
    pub inner_converged: bool,
    pub prox_degenerate: bool,
    pub apo_updated: bool,
}

const HEADER: &str = "t,beta,beta_next,dx,dy,dz,feas,lagrangian,sigma_tilde,zeta,xi,zeta_lip,xi_lip,\
samples_total,r_prox,r_grad,r_feas,g_delta,rho,y_inclusion,x_stationarity,z_identity,dual_gradient,\
inner_iterations,inner_converged,prox_degenerate,apo_updated";

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

impl TraceRow {
    pub fn header() -> &'static str {
        HEADER
    }

    pub fn to_csv(&self) -> String {
        let fields = [
            self.t.to_string(),
            real(self.beta),
            real(self.beta_next),
            real(self.dx),
            real(self.dy),
            real(self.dz),
            real(self.feas),
            real(self.lagrangian),
            real(self.sigma_tilde),
            real(self.zeta),
            real(self.xi),
            real(self.zeta_lip),
            real(self.xi_lip),
            self.samples_total.to_string(),
            real(self.r_prox),
            real(self.r_grad),
            real(self.r_feas),
            real(self.g_delta),
            self.rho.map(real).unwrap_or_default(),
            real(self.y_inclusion),
            real(self.x_stationarity),
            real(self.z_identity),
            real(self.dual_gradient),
            self.inner_iterations.to_string(),
            u8::from(self.inner_converged).to_string(),
            u8::from(self.prox_degenerate).to_string(),
            u8::from(self.apo_updated).to_string(),
        ];
        fields.join(",")
    }
}

pub fn write_trace<W: Write>(mut out: W, rows: &[TraceRow]) -> io::Result<()> {
    writeln!(out, "{HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.to_csv())?;
    }
    out.flush()
}
