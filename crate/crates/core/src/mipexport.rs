//! The full routing program as a CPLEX-LP text model.
//!
//! Flow and degree rows, MTZ ordering with one slot per depot, a customer
//! counter for `n_max`, the chance-constrained SoC integrator, load
//! accumulation and the robust-time objective. Square roots of accumulated
//! variances are linked through quadratic rows; the objective's root uses a
//! second-order cone.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use crate::instance::{Instance, NodeId, NodeKind};
use crate::routeeval::{soc_profile, Solution};
use crate::stochmath::quantile;
use crate::Result;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    Depart,
    CustomerEntry,
    StationEntry,
    Flow,
    OrderInit,
    OrderStep,
    OrderReturnLow,
    OrderReturnHigh,
    CountInit,
    CountStep,
    CountLimit,
    SocInit,
    VarInit,
    ReturnVarInit,
    SocStep,
    VarStep,
    ReturnVar,
    PassThrough,
    SocChance,
    ReturnChance,
    SigmaLink,
    ReturnSigmaLink,
    Charge,
    ChargeCap,
    LoadInit,
    LoadStep,
    LoadLimit,
    TimeCone,
}

impl Family {
    pub const ALL: [Family; 28] = [
        Family::Depart,
        Family::CustomerEntry,
        Family::StationEntry,
        Family::Flow,
        Family::OrderInit,
        Family::OrderStep,
        Family::OrderReturnLow,
        Family::OrderReturnHigh,
        Family::CountInit,
        Family::CountStep,
        Family::CountLimit,
        Family::SocInit,
        Family::VarInit,
        Family::ReturnVarInit,
        Family::SocStep,
        Family::VarStep,
        Family::ReturnVar,
        Family::PassThrough,
        Family::SocChance,
        Family::ReturnChance,
        Family::SigmaLink,
        Family::ReturnSigmaLink,
        Family::Charge,
        Family::ChargeCap,
        Family::LoadInit,
        Family::LoadStep,
        Family::LoadLimit,
        Family::TimeCone,
    ];

    pub fn prefix(self) -> &'static str {
        match self {
            Family::Depart => "depart",
            Family::CustomerEntry => "visit",
            Family::StationEntry => "station",
            Family::Flow => "flow",
            Family::OrderInit => "ord0",
            Family::OrderStep => "ord",
            Family::OrderReturnLow => "ordlo",
            Family::OrderReturnHigh => "ordhi",
            Family::CountInit => "cnt0",
            Family::CountStep => "cnt",
            Family::CountLimit => "cntmax",
            Family::SocInit => "soc0",
            Family::VarInit => "var0",
            Family::ReturnVarInit => "fvar0",
            Family::SocStep => "soc",
            Family::VarStep => "var",
            Family::ReturnVar => "fvar",
            Family::PassThrough => "pass",
            Family::SocChance => "chance",
            Family::ReturnChance => "fchance",
            Family::SigmaLink => "sig",
            Family::ReturnSigmaLink => "fsig",
            Family::Charge => "charge",
            Family::ChargeCap => "cap",
            Family::LoadInit => "load0",
            Family::LoadStep => "load",
            Family::LoadLimit => "loadmax",
            Family::TimeCone => "tcone",
        }
    }

    /// Row count from the node-class sizes alone.
    pub fn expected_count(self, inst: &Instance) -> usize {
        let nd = inst.depots().len();
        let nc = inst.customers().len();
        let ns = inst.stations().len();
        let n = inst.n();
        let a = nc + ns;
        match self {
            Family::Depart
            | Family::OrderInit
            | Family::CountInit
            | Family::SocInit
            | Family::VarInit
            | Family::ReturnVarInit
            | Family::LoadInit => nd,
            Family::CustomerEntry => nc,
            Family::StationEntry | Family::Charge | Family::ChargeCap => ns,
            Family::Flow => n,
            Family::OrderStep
            | Family::CountStep
            | Family::SocStep
            | Family::VarStep
            | Family::LoadStep => a * (n - 1),
            Family::OrderReturnLow
            | Family::OrderReturnHigh
            | Family::ReturnVar
            | Family::ReturnChance => a * nd,
            Family::CountLimit
            | Family::SocChance
            | Family::SigmaLink
            | Family::ReturnSigmaLink
            | Family::LoadLimit => a,
            Family::PassThrough => nd + nc,
            Family::TimeCone => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Var {
    pub name: String,
    pub binary: bool,
    pub lower: f64,
    pub upper: f64,
}

/// `linear + Σ coef * var^2  (sense)  rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub family: Family,
    pub linear: Vec<(usize, f64)>,
    pub quadratic: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, values: &[f64]) -> f64 {
        let lin: f64 = self.linear.iter().map(|&(v, a)| a * values[v]).sum();
        let quad: f64 = self
            .quadratic
            .iter()
            .map(|&(v, a)| a * values[v] * values[v])
            .sum();
        lin + quad
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BigM {
    /// Width of one depot's MTZ slot.
    pub slot: f64,
    pub u_max: f64,
    pub e_max: f64,
    pub v_max: f64,
    pub q_max: f64,
    pub k_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MipModel {
    pub instance_name: String,
    pub vars: Vec<Var>,
    pub rows: Vec<Row>,
    pub objective: Vec<(usize, f64)>,
    pub big_m: BigM,
    pub phi_e: f64,
    pub phi_t: f64,
}

impl MipModel {
    pub fn var(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn family_counts(&self) -> BTreeMap<Family, usize> {
        let mut out: BTreeMap<Family, usize> = Family::ALL.iter().map(|&f| (f, 0)).collect();
        for r in &self.rows {
            *out.get_mut(&r.family).unwrap() += 1;
        }
        out
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, a)| a * values[v]).sum()
    }
}

struct Vars {
    x: Vec<Vec<Option<usize>>>,
    u: Vec<usize>,
    k: Vec<usize>,
    eps: Vec<usize>,
    e: Vec<usize>,
    w: Vec<usize>,
    wf: Vec<usize>,
    s: Vec<usize>,
    sf: Vec<usize>,
    c: Vec<usize>,
    tau: Vec<Option<usize>>,
    aux: usize,
}

struct Builder {
    vars: Vec<Var>,
    rows: Vec<Row>,
}

impl Builder {
    fn var(&mut self, name: String, binary: bool, lower: f64, upper: f64) -> usize {
        self.vars.push(Var {
            name,
            binary,
            lower,
            upper,
        });
        self.vars.len() - 1
    }

    fn per_node(&mut self, n: usize, prefix: &str, lower: f64) -> Vec<usize> {
        (0..n)
            .map(|i| self.var(format!("{prefix}_{i}"), false, lower, f64::INFINITY))
            .collect()
    }

    fn row(
        &mut self,
        family: Family,
        tag: String,
        linear: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) {
        self.rows.push(Row {
            name: format!("{}_{tag}", family.prefix()),
            family,
            linear,
            quadratic: Vec::new(),
            sense,
            rhs,
        });
    }
}

pub fn build_model(inst: &Instance) -> Result<MipModel> {
    let phi_e = quantile(inst.robustness.p_e)?;
    let phi_t = quantile(inst.robustness.p_t)?;
    let n = inst.n();
    let veh = &inst.vehicle;
    let depots = inst.depots();
    let customers = inst.customers();
    let stations = inst.stations();
    let visit: Vec<NodeId> = customers.iter().chain(&stations).copied().collect();
    let e = &inst.edges;

    let slot = (veh.n_max + stations.len() + 1) as f64;
    let max_row_e = (0..n)
        .map(|i| (0..n).map(|j| e.e_mu[(i, j)]).sum::<f64>())
        .fold(0.0, f64::max);
    let var_total: f64 = e.e_sigma.values().iter().map(|s| s * s).sum();
    let max_q = customers
        .iter()
        .map(|&c| inst.node(c).demand)
        .fold(0.0, f64::max);
    let big_m = BigM {
        slot,
        u_max: n as f64 + slot * (depots.len() + 1) as f64,
        e_max: veh.soc_max - veh.soc_min.min(0.0) + max_row_e,
        v_max: var_total.max(1.0),
        q_max: veh.capacity + max_q,
        k_max: veh.n_max as f64 + 1.0,
    };

    let mut b = Builder {
        vars: Vec::new(),
        rows: Vec::new(),
    };
    let mut x = vec![vec![None; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                x[i][j] = Some(b.var(format!("x_{i}_{j}"), true, 0.0, 1.0));
            }
        }
    }
    let v = Vars {
        u: b.per_node(n, "u", 0.0),
        k: b.per_node(n, "k", 0.0),
        eps: b.per_node(n, "eps", f64::NEG_INFINITY),
        e: b.per_node(n, "e", f64::NEG_INFINITY),
        w: b.per_node(n, "w", 0.0),
        wf: b.per_node(n, "wf", 0.0),
        s: b.per_node(n, "s", 0.0),
        sf: b.per_node(n, "sf", 0.0),
        c: b.per_node(n, "c", 0.0),
        tau: (0..n)
            .map(|i| {
                (inst.kind(NodeId(i)) == NodeKind::Station)
                    .then(|| b.var(format!("tau_{i}"), false, 0.0, f64::INFINITY))
            })
            .collect(),
        aux: b.var("aux".into(), false, 0.0, f64::INFINITY),
        x,
    };
    let x = |i: usize, j: usize| v.x[i][j].unwrap();

    // Degree and flow.
    for &d in &depots {
        let lin = visit.iter().map(|&j| (x(d.0, j.0), 1.0)).collect();
        b.row(
            Family::Depart,
            d.to_string(),
            lin,
            Sense::Eq,
            inst.node(d).vehicles_at as f64,
        );
    }
    for &c in &customers {
        let lin = (0..n)
            .filter(|&i| i != c.0)
            .map(|i| (x(i, c.0), 1.0))
            .collect();
        b.row(Family::CustomerEntry, c.to_string(), lin, Sense::Eq, 1.0);
    }
    for &s in &stations {
        let lin = (0..n)
            .filter(|&i| i != s.0)
            .map(|i| (x(i, s.0), 1.0))
            .collect();
        b.row(Family::StationEntry, s.to_string(), lin, Sense::Le, 1.0);
    }
    for i in 0..n {
        let mut lin: Vec<(usize, f64)> =
            (0..n).filter(|&j| j != i).map(|j| (x(i, j), 1.0)).collect();
        lin.extend((0..n).filter(|&j| j != i).map(|j| (x(j, i), -1.0)));
        b.row(Family::Flow, i.to_string(), lin, Sense::Eq, 0.0);
    }

    // Ordering: depot k owns the slot [1 + k W, (1 + k) W].
    for (k, &d) in depots.iter().enumerate() {
        b.row(
            Family::OrderInit,
            d.to_string(),
            vec![(v.u[d.0], 1.0)],
            Sense::Eq,
            1.0 + k as f64 * slot,
        );
        b.row(
            Family::CountInit,
            d.to_string(),
            vec![(v.k[d.0], 1.0)],
            Sense::Eq,
            0.0,
        );
        b.row(
            Family::SocInit,
            d.to_string(),
            vec![(v.eps[d.0], 1.0)],
            Sense::Eq,
            veh.soc_start,
        );
        b.row(
            Family::VarInit,
            d.to_string(),
            vec![(v.w[d.0], 1.0)],
            Sense::Eq,
            0.0,
        );
        b.row(
            Family::ReturnVarInit,
            d.to_string(),
            vec![(v.wf[d.0], 1.0)],
            Sense::Eq,
            0.0,
        );
        b.row(
            Family::LoadInit,
            d.to_string(),
            vec![(v.c[d.0], 1.0)],
            Sense::Eq,
            0.0,
        );
    }
    for &j in &visit {
        let j = j.0;
        let q_j = inst.nodes[j].demand;
        let is_cust = (inst.kind(NodeId(j)) == NodeKind::Customer) as u8 as f64;
        for i in (0..n).filter(|&i| i != j) {
            let tag = format!("{i}_{j}");
            let xij = x(i, j);
            // u_j >= u_i + 1 - U (1 - x)
            b.row(
                Family::OrderStep,
                tag.clone(),
                vec![(v.u[j], 1.0), (v.u[i], -1.0), (xij, -big_m.u_max)],
                Sense::Ge,
                1.0 - big_m.u_max,
            );
            b.row(
                Family::CountStep,
                tag.clone(),
                vec![(v.k[j], 1.0), (v.k[i], -1.0), (xij, -big_m.k_max)],
                Sense::Ge,
                is_cust - big_m.k_max,
            );
            // eps_j <= e_i - E_ij + M (1 - x)
            b.row(
                Family::SocStep,
                tag.clone(),
                vec![(v.eps[j], 1.0), (v.e[i], -1.0), (xij, big_m.e_max)],
                Sense::Le,
                big_m.e_max - e.e_mu[(i, j)],
            );
            // w_j >= w_i + sigma_ij^2 - V (1 - x)
            let s2 = e.e_sigma[(i, j)].powi(2);
            b.row(
                Family::VarStep,
                tag.clone(),
                vec![(v.w[j], 1.0), (v.w[i], -1.0), (xij, -big_m.v_max)],
                Sense::Ge,
                s2 - big_m.v_max,
            );
            b.row(
                Family::LoadStep,
                tag,
                vec![(v.c[j], 1.0), (v.c[i], -1.0), (xij, -big_m.q_max)],
                Sense::Ge,
                q_j - big_m.q_max,
            );
        }
    }
    for &i in &visit {
        let i = i.0;
        for (k, &d) in depots.iter().enumerate() {
            let tag = format!("{i}_{d}");
            let xid = x(i, d.0);
            let lo = 1.0 + k as f64 * slot;
            let hi = (1 + k) as f64 * slot;
            b.row(
                Family::OrderReturnLow,
                tag.clone(),
                vec![(v.u[i], 1.0), (xid, -big_m.u_max)],
                Sense::Ge,
                lo - big_m.u_max,
            );
            b.row(
                Family::OrderReturnHigh,
                tag.clone(),
                vec![(v.u[i], 1.0), (xid, big_m.u_max)],
                Sense::Le,
                hi + big_m.u_max,
            );
            b.row(
                Family::ReturnVar,
                tag.clone(),
                vec![(v.wf[i], 1.0), (v.w[i], -1.0), (xid, -big_m.v_max)],
                Sense::Ge,
                e.e_sigma[(i, d.0)].powi(2) - big_m.v_max,
            );
            // e_i - E_id - phi sf_i >= soc_min - M (1 - x)
            b.row(
                Family::ReturnChance,
                tag,
                vec![(v.e[i], 1.0), (v.sf[i], -phi_e), (xid, -big_m.e_max)],
                Sense::Ge,
                veh.soc_min + e.e_mu[(i, d.0)] - big_m.e_max,
            );
        }
        b.row(
            Family::CountLimit,
            i.to_string(),
            vec![(v.k[i], 1.0)],
            Sense::Le,
            veh.n_max as f64,
        );
        b.row(
            Family::SocChance,
            i.to_string(),
            vec![(v.eps[i], 1.0), (v.s[i], -phi_e)],
            Sense::Ge,
            veh.soc_min,
        );
        b.row(
            Family::LoadLimit,
            i.to_string(),
            vec![(v.c[i], 1.0)],
            Sense::Le,
            veh.capacity,
        );
        for (fam, sig, acc) in [
            (Family::SigmaLink, v.s[i], v.w[i]),
            (Family::ReturnSigmaLink, v.sf[i], v.wf[i]),
        ] {
            b.rows.push(Row {
                name: format!("{}_{i}", fam.prefix()),
                family: fam,
                linear: vec![(acc, -1.0)],
                quadratic: vec![(sig, 1.0)],
                sense: Sense::Ge,
                rhs: 0.0,
            });
        }
    }
    for i in (0..n).filter(|&i| inst.kind(NodeId(i)) != NodeKind::Station) {
        b.row(
            Family::PassThrough,
            i.to_string(),
            vec![(v.e[i], 1.0), (v.eps[i], -1.0)],
            Sense::Eq,
            0.0,
        );
    }
    for &s in &stations {
        let t = v.tau[s.0].unwrap();
        b.row(
            Family::Charge,
            s.to_string(),
            vec![(v.e[s.0], 1.0), (v.eps[s.0], -1.0), (t, -veh.charge_rate)],
            Sense::Eq,
            0.0,
        );
        b.row(
            Family::ChargeCap,
            s.to_string(),
            vec![(v.e[s.0], 1.0)],
            Sense::Le,
            veh.soc_max,
        );
    }
    // aux^2 >= sum (T_sigma x)^2
    let mut quad = vec![(v.aux, 1.0)];
    for i in 0..n {
        for j in 0..n {
            if i != j && e.t_sigma[(i, j)] > 0.0 {
                quad.push((x(i, j), -e.t_sigma[(i, j)].powi(2)));
            }
        }
    }
    b.rows.push(Row {
        name: Family::TimeCone.prefix().to_string(),
        family: Family::TimeCone,
        linear: Vec::new(),
        quadratic: quad,
        sense: Sense::Ge,
        rhs: 0.0,
    });

    let mut objective: Vec<(usize, f64)> = v.tau.iter().flatten().map(|&t| (t, 1.0)).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && e.t_mu[(i, j)] != 0.0 {
                objective.push((x(i, j), e.t_mu[(i, j)]));
            }
        }
    }
    objective.push((v.aux, phi_t));

    Ok(MipModel {
        instance_name: inst.name.clone(),
        vars: b.vars,
        rows: b.rows,
        objective,
        big_m,
        phi_e,
        phi_t,
    })
}

fn write_terms(out: &mut String, vars: &[Var], terms: &[(usize, f64)], square: bool) {
    for (k, &(v, a)) in terms.iter().enumerate() {
        if k > 0 && k % 8 == 0 {
            out.push_str("\n   ");
        }
        let sign = if a < 0.0 { "-" } else { "+" };
        let mag = a.abs();
        let name = &vars[v].name;
        let pow = if square { " ^2" } else { "" };
        if k == 0 && a >= 0.0 {
            if mag == 1.0 {
                let _ = write!(out, " {name}{pow}");
            } else {
                let _ = write!(out, " {mag} {name}{pow}");
            }
        } else if mag == 1.0 {
            let _ = write!(out, " {sign} {name}{pow}");
        } else {
            let _ = write!(out, " {sign} {mag} {name}{pow}");
        }
    }
}

fn num(x: f64) -> String {
    if x == f64::INFINITY {
        "+inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        x.to_string()
    }
}

/// CPLEX-LP text of the model; rows and columns in construction order.
pub fn write_model(m: &MipModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ RECVRP-MIP {FORMAT_VERSION} (CPLEX LP format)");
    let _ = writeln!(out, "\\ instance: {}", m.instance_name);
    let _ = writeln!(out, "\\ phi_e = {}, phi_t = {}", m.phi_e, m.phi_t);
    let bm = &m.big_m;
    let _ = writeln!(
        out,
        "\\ big-M: slot {} u_max {} e_max {} v_max {} q_max {} k_max {}",
        bm.slot, bm.u_max, bm.e_max, bm.v_max, bm.q_max, bm.k_max
    );
    for line in [
        "\\ soc rows subtract edge energy: eps_j <= e_i - E_ij + e_max (1 - x_ij)",
        "\\ variance and load big-M terms vanish on used edges: ... - M (1 - x_ij)",
        "\\ step rows range over customer and station heads only",
        "\\ return ordering rows use x_i_d for the returning edge",
        "\\ ordering slots have width n_max + stations + 1; k_i counts customers for n_max",
        "\\ entry chance rows use the entering soc eps_i",
        "\\ sig rows link s_i to the squared accumulator w_i (nonconvex quadratic)",
        "\\ tcone: aux^2 >= sum (T_sigma_ij x_ij)^2, second-order cone",
        "\\ subtour cuts of subset type are not emitted",
    ] {
        let _ = writeln!(out, "{line}");
    }
    out.push_str("Minimize\n obj:");
    write_terms(&mut out, &m.vars, &m.objective, false);
    out.push_str("\nSubject To\n");
    for r in &m.rows {
        let _ = write!(out, " {}:", r.name);
        write_terms(&mut out, &m.vars, &r.linear, false);
        if !r.quadratic.is_empty() {
            out.push_str(if r.linear.is_empty() { " [" } else { " + [" });
            write_terms(&mut out, &m.vars, &r.quadratic, true);
            out.push_str(" ]");
        }
        let _ = writeln!(out, " {} {}", r.sense.symbol(), r.rhs);
    }
    out.push_str("Bounds\n");
    for v in m.vars.iter().filter(|v| !v.binary) {
        match (v.lower, v.upper) {
            (l, u) if l == f64::NEG_INFINITY && u == f64::INFINITY => {
                let _ = writeln!(out, " {} free", v.name);
            }
            (l, u) if l == 0.0 && u == f64::INFINITY => {}
            (l, u) => {
                let _ = writeln!(out, " {} <= {} <= {}", num(l), v.name, num(u));
            }
        }
    }
    out.push_str("Binaries\n");
    let bins: Vec<&str> = m
        .vars
        .iter()
        .filter(|v| v.binary)
        .map(|v| v.name.as_str())
        .collect();
    for chunk in bins.chunks(10) {
        let _ = writeln!(out, " {}", chunk.join(" "));
    }
    out.push_str("End\n");
    out
}

/// A row or bound not satisfied by an assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct RowViolation {
    pub name: String,
    pub activity: f64,
    pub sense: &'static str,
    pub rhs: f64,
}

impl fmt::Display for RowViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} {} {}",
            self.name, self.activity, self.sense, self.rhs
        )
    }
}

/// Rows and bounds violated by `values` beyond `tol * max(1, |rhs|)`.
pub fn check_assignment(m: &MipModel, values: &[f64], tol: f64) -> Vec<RowViolation> {
    let mut out = Vec::new();
    for (v, &val) in m.vars.iter().zip(values) {
        let slack = tol * val.abs().max(1.0);
        if val < v.lower - slack || val > v.upper + slack || (v.binary && val != 0.0 && val != 1.0)
        {
            out.push(RowViolation {
                name: format!("bound {}", v.name),
                activity: val,
                sense: "in",
                rhs: v.lower,
            });
        }
    }
    for r in &m.rows {
        let a = r.activity(values);
        let slack = tol * r.rhs.abs().max(1.0);
        let ok = match r.sense {
            Sense::Le => a <= r.rhs + slack,
            Sense::Ge => a >= r.rhs - slack,
            Sense::Eq => (a - r.rhs).abs() <= slack,
        };
        if !ok {
            out.push(RowViolation {
                name: r.name.clone(),
                activity: a,
                sense: r.sense.symbol(),
                rhs: r.rhs,
            });
        }
    }
    out
}

/// Values of every model column implied by a solution. Unvisited stations
/// sit at full charge with zero accumulators.
pub fn assignment_from_solution(m: &MipModel, sol: &Solution, inst: &Instance) -> Result<Vec<f64>> {
    let n = inst.n();
    let mut val = vec![0.0; m.vars.len()];
    let idx = |name: String| m.var(&name).expect("model column");
    let depots = inst.depots();
    for i in 0..n {
        let full = inst.kind(NodeId(i)) == NodeKind::Station;
        let soc = if full {
            inst.vehicle.soc_max
        } else {
            inst.vehicle.soc_start
        };
        val[idx(format!("eps_{i}"))] = soc;
        val[idx(format!("e_{i}"))] = soc;
        val[idx(format!("u_{i}"))] = 1.0;
    }
    for (k, &d) in depots.iter().enumerate() {
        val[idx(format!("u_{d}"))] = 1.0 + k as f64 * m.big_m.slot;
    }
    let mut t_var = 0.0;
    for (r, p) in sol.routes.iter().zip(&sol.plans) {
        let prof = soc_profile(r, p, inst)?;
        let d = r.depot();
        let k = depots.iter().position(|&x| x == d).unwrap_or(0);
        let base = 1.0 + k as f64 * m.big_m.slot;
        let (mut load, mut count) = (0.0, 0.0);
        let last = r.nodes.len() - 1;
        for pos in 1..=last {
            let (a, b) = (r.nodes[pos - 1].0, r.nodes[pos].0);
            val[idx(format!("x_{a}_{b}"))] = 1.0;
            t_var += inst.edges.t_sigma[(a, b)].powi(2);
            if pos == last {
                let pt = &prof.points[pos];
                val[idx(format!("wf_{a}"))] = pt.var;
                val[idx(format!("sf_{a}"))] = pt.var.sqrt();
                continue;
            }
            let pt = &prof.points[pos];
            if inst.kind(NodeId(b)) == NodeKind::Customer {
                load += inst.nodes[b].demand;
                count += 1.0;
            }
            val[idx(format!("u_{b}"))] = base + pos as f64;
            val[idx(format!("k_{b}"))] = count;
            val[idx(format!("c_{b}"))] = load;
            val[idx(format!("eps_{b}"))] = pt.enter_mu;
            val[idx(format!("e_{b}"))] = pt.exit_mu;
            val[idx(format!("w_{b}"))] = pt.var;
            val[idx(format!("s_{b}"))] = pt.var.sqrt();
            if inst.kind(NodeId(b)) == NodeKind::Station {
                val[idx(format!("tau_{b}"))] = p.at(pos);
            }
        }
    }
    val[idx("aux".into())] = t_var.sqrt();
    Ok(val)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::tests::line_instance;

    #[test]
    fn three_nodes_have_six_edge_binaries() {
        let inst = line_instance();
        let mut small = inst.clone();
        small.nodes.truncate(3);
        for m in [
            &mut small.edges.t_mu,
            &mut small.edges.t_sigma,
            &mut small.edges.e_mu,
            &mut small.edges.e_sigma,
        ] {
            *m = m.submatrix(&[0, 1, 2]);
        }
        let m = build_model(&small).unwrap();
        assert_eq!(m.vars.iter().filter(|v| v.binary).count(), 6);
    }

    #[test]
    fn counts_match_formulas() {
        let inst = line_instance();
        let m = build_model(&inst).unwrap();
        for (f, c) in m.family_counts() {
            assert_eq!(c, f.expected_count(&inst), "{f:?}");
        }
        assert_eq!(m.family_counts()[&Family::Depart], 1);
        assert_eq!(m.family_counts()[&Family::CustomerEntry], 2);
    }

    #[test]
    fn output_is_deterministic_and_well_formed() {
        let inst = line_instance();
        let a = write_model(&build_model(&inst).unwrap());
        let b = write_model(&build_model(&inst).unwrap());
        assert_eq!(a, b);
        for section in [
            "Minimize\n",
            "Subject To\n",
            "Bounds\n",
            "Binaries\n",
            "End\n",
        ] {
            assert!(a.contains(section), "{section}");
        }
        assert!(a.lines().all(|l| l.len() < 510));
    }

    #[test]
    fn row_activity_with_quadratic_terms() {
        let r = Row {
            name: "r".into(),
            family: Family::SigmaLink,
            linear: vec![(1, -1.0)],
            quadratic: vec![(0, 1.0)],
            sense: Sense::Ge,
            rhs: 0.0,
        };
        assert_eq!(r.activity(&[3.0, 9.0]), 0.0);
        assert_eq!(r.activity(&[2.0, 9.0]), -5.0);
    }
}
