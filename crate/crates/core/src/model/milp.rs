use super::StructuredProblem;
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub name: String,
    /// Constraint family, e.g. `travel` or `separation`.
    pub family: &'static str,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, c)| c * values[v]).sum()
    }

    /// Amount by which `values` violates the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let a = self.activity(values);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BigMEntry {
    pub row: String,
    pub family: &'static str,
    pub value: f64,
    pub note: String,
}

/// Flat sparse mixed-integer program; objective is minimized.
#[derive(Clone, Debug, Default)]
pub struct MilpInstance {
    pub variables: Vec<Variable>,
    pub rows: Vec<Row>,
    pub objective: Vec<(usize, f64)>,
    pub big_m: Vec<BigMEntry>,
    pub(crate) layout: Layout,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Layout {
    /// Route variable per flight and link.
    pub x: Vec<Vec<Option<usize>>>,
    /// Speed variables per flight, link and level.
    pub d: Vec<Vec<Vec<usize>>>,
    pub ar: Vec<Vec<Option<usize>>>,
    pub dp: Vec<Vec<Option<usize>>>,
    pub ht: Vec<Vec<Option<usize>>>,
    /// Order binary per (waypoint, flight a, flight b), 1 when `a` leads.
    pub order: BTreeMap<(usize, usize, usize), usize>,
}

impl MilpInstance {
    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn binary_count(&self) -> usize {
        self.variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * values[v]).sum()
    }
}

struct Builder {
    inst: MilpInstance,
}

impl Builder {
    fn var(&mut self, name: String, kind: VarKind, lower: f64, upper: f64) -> usize {
        self.inst.variables.push(Variable {
            name,
            kind,
            lower,
            upper,
        });
        self.inst.variables.len() - 1
    }

    fn row(
        &mut self,
        name: String,
        family: &'static str,
        terms: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) {
        let mut coeffs: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match coeffs.iter_mut().find(|e| e.0 == v) {
                Some(e) => e.1 += c,
                None => coeffs.push((v, c)),
            }
        }
        self.inst.rows.push(Row {
            name,
            family,
            coeffs,
            sense,
            rhs,
        });
    }

    fn big_m(&mut self, family: &'static str, value: f64, note: &str) {
        let row = self.inst.rows.last().expect("row just added").name.clone();
        self.inst.big_m.push(BigMEntry {
            row,
            family,
            value,
            note: note.to_string(),
        });
    }
}

/// Linear expression with a constant part, used for visit indicators.
#[derive(Clone, Default)]
struct Expr {
    terms: Vec<(usize, f64)>,
    constant: f64,
}

impl Expr {
    fn add_scaled(&mut self, other: &Expr, s: f64) {
        self.terms
            .extend(other.terms.iter().map(|&(v, c)| (v, c * s)));
        self.constant += other.constant * s;
    }
}

pub(super) fn build(sp: &StructuredProblem) -> MilpInstance {
    let net = &sp.net;
    let nf = sp.flights.len();
    let nw = net.len();
    let nl = net.links().len();
    let t_max = sp.t_max;
    let m_dis = t_max + sp.hp.separation.max_gap();
    let mut b = Builder {
        inst: MilpInstance::default(),
    };
    let mut lay = Layout {
        x: vec![vec![None; nl]; nf],
        d: vec![vec![Vec::new(); nl]; nf],
        ar: vec![vec![None; nw]; nf],
        dp: vec![vec![None; nw]; nf],
        ht: vec![vec![None; nw]; nf],
        order: BTreeMap::new(),
    };
    let wname = |j: usize| net.id(j).0;
    let lname = |lx: usize| {
        let (i, j) = net.link_endpoints(lx);
        format!("{}_{}", wname(i), wname(j))
    };

    for (k, f) in sp.flights.iter().enumerate() {
        let id = f.id.0;
        for lx in 0..nl {
            let (i, j) = net.link_endpoints(lx);
            if f.visits[i] && f.visits[j] {
                lay.x[k][lx] =
                    Some(b.var(format!("x_f{id}_{}", lname(lx)), VarKind::Binary, 0.0, 1.0));
            }
        }
        for lx in 0..nl {
            if lay.x[k][lx].is_some() {
                for s in 0..net.link(lx).levels() {
                    let v = b.var(
                        format!("d_f{id}_{}_s{s}", lname(lx)),
                        VarKind::Binary,
                        0.0,
                        1.0,
                    );
                    lay.d[k][lx].push(v);
                }
            }
        }
        for j in 0..nw {
            if !f.visits[j] {
                continue;
            }
            let w = wname(j);
            let (ar, dp, ht) = if j == f.anchor {
                (
                    (f.arrival, f.arrival),
                    (f.ready, f.latest),
                    (f.ready - f.arrival, f.latest - f.arrival),
                )
            } else {
                ((0.0, t_max), (0.0, t_max), (0.0, sp.cap[j]))
            };
            lay.ar[k][j] = Some(b.var(format!("AR_f{id}_w{w}"), VarKind::Continuous, ar.0, ar.1));
            lay.dp[k][j] = Some(b.var(format!("DP_f{id}_w{w}"), VarKind::Continuous, dp.0, dp.1));
            lay.ht[k][j] = Some(b.var(format!("HT_f{id}_w{w}"), VarKind::Continuous, ht.0, ht.1));
        }
    }
    for j in 0..nw {
        for a in 0..nf {
            for c in a + 1..nf {
                if sp.flights[a].visits[j] && sp.flights[c].visits[j] {
                    let name = format!(
                        "o_w{}_f{}_f{}",
                        wname(j),
                        sp.flights[a].id.0,
                        sp.flights[c].id.0
                    );
                    lay.order
                        .insert((j, a, c), b.var(name, VarKind::Binary, 0.0, 1.0));
                }
            }
        }
    }

    let visit = |lay: &Layout, k: usize, j: usize| -> Expr {
        if sp.flights[k].anchor == j {
            return Expr {
                terms: Vec::new(),
                constant: 1.0,
            };
        }
        Expr {
            terms: net
                .in_links(j)
                .iter()
                .filter_map(|&lx| lay.x[k][lx].map(|v| (v, 1.0)))
                .collect(),
            constant: 0.0,
        }
    };

    let mut sink_terms = Vec::new();
    let mut sink_rhs = 0.0;
    for (k, f) in sp.flights.iter().enumerate() {
        let id = f.id.0;
        if !net.is_runway(f.anchor) {
            let terms = net
                .out_links(f.anchor)
                .iter()
                .filter_map(|&lx| lay.x[k][lx].map(|v| (v, 1.0)))
                .collect();
            b.row(format!("src_f{id}"), "source", terms, Sense::Eq, 1.0);
            sink_rhs += 1.0;
        }
        for j in 0..nw {
            if net.is_runway(j) {
                sink_terms.extend(
                    net.in_links(j)
                        .iter()
                        .filter_map(|&lx| lay.x[k][lx].map(|v| (v, 1.0))),
                );
            }
        }
    }
    if !sink_terms.is_empty() {
        b.row("sink".into(), "sink", sink_terms, Sense::Eq, sink_rhs);
    }

    for (k, f) in sp.flights.iter().enumerate() {
        let id = f.id.0;
        for j in 0..nw {
            if !f.visits[j] || j == f.anchor || net.is_runway(j) {
                continue;
            }
            let mut terms: Vec<(usize, f64)> = net
                .in_links(j)
                .iter()
                .filter_map(|&lx| lay.x[k][lx].map(|v| (v, 1.0)))
                .collect();
            terms.extend(
                net.out_links(j)
                    .iter()
                    .filter_map(|&lx| lay.x[k][lx].map(|v| (v, -1.0))),
            );
            b.row(
                format!("flow_f{id}_w{}", wname(j)),
                "conservation",
                terms,
                Sense::Eq,
                0.0,
            );
        }
        for lx in 0..nl {
            let Some(x) = lay.x[k][lx] else { continue };
            let mut terms: Vec<(usize, f64)> = lay.d[k][lx].iter().map(|&v| (v, 1.0)).collect();
            terms.push((x, -1.0));
            b.row(
                format!("spd_f{id}_{}", lname(lx)),
                "speed",
                terms,
                Sense::Eq,
                0.0,
            );
        }
        for lx in 0..nl {
            let Some(x) = lay.x[k][lx] else { continue };
            let (i, j) = net.link_endpoints(lx);
            let link = net.link(lx);
            let ar = lay.ar[k][j].expect("visited");
            let dp = lay.dp[k][i].expect("visited");
            let mut base = vec![(ar, 1.0), (dp, -1.0)];
            base.extend(
                lay.d[k][lx]
                    .iter()
                    .enumerate()
                    .map(|(s, &v)| (v, -link.travel_time(s))),
            );
            let mut lo = base.clone();
            lo.push((x, -t_max));
            b.row(
                format!("tlo_f{id}_{}", lname(lx)),
                "travel",
                lo,
                Sense::Ge,
                -t_max,
            );
            b.big_m("travel", t_max, "T_max");
            let mut hi = base;
            hi.push((x, t_max));
            b.row(
                format!("thi_f{id}_{}", lname(lx)),
                "travel",
                hi,
                Sense::Le,
                t_max,
            );
            b.big_m("travel", t_max, "T_max");
        }
        for j in 0..nw {
            if let (Some(ar), Some(dp), Some(ht)) = (lay.ar[k][j], lay.dp[k][j], lay.ht[k][j]) {
                b.row(
                    format!("hold_f{id}_w{}", wname(j)),
                    "holding",
                    vec![(dp, 1.0), (ar, -1.0), (ht, -1.0)],
                    Sense::Eq,
                    0.0,
                );
            }
        }
    }

    let order: Vec<((usize, usize, usize), usize)> =
        lay.order.iter().map(|(&k, &v)| (k, v)).collect();
    for &((j, a, c), o) in &order {
        let rule = sp.pair_rule(a, c, j);
        let (ida, idc) = (sp.flights[a].id.0, sp.flights[c].id.0);
        let mut relax = Expr::default();
        relax.add_scaled(&visit(&lay, a, j), -m_dis);
        relax.add_scaled(&visit(&lay, c, j), -m_dis);
        let gap_ac = sp.gap(a, c);
        let gap_ca = sp.gap(c, a);
        let mut fams: Vec<(&str, &Vec<Vec<Option<usize>>>, f64, f64)> = Vec::new();
        if rule.ar {
            fams.push(("A", &lay.ar, gap_ac, gap_ca));
        }
        let (dac, dca) = if rule.dp_gap {
            (gap_ac, gap_ca)
        } else {
            (0.0, 0.0)
        };
        fams.push(("D", &lay.dp, dac, dca));
        let mut pending = Vec::new();
        for (tag, table, g_ac, g_ca) in fams {
            let va = table[a][j].expect("visited");
            let vc = table[c][j].expect("visited");
            // a leads: t_c - t_a >= g - M(1 - o) - M(2 - v_a - v_c)
            let mut t1 = vec![(vc, 1.0), (va, -1.0), (o, -m_dis)];
            t1.extend(relax.terms.iter().copied());
            let rhs1 = g_ac - 3.0 * m_dis - relax.constant;
            pending.push((format!("sep{tag}_w{}_f{ida}_f{idc}_ab", wname(j)), t1, rhs1));
            let mut t2 = vec![(va, 1.0), (vc, -1.0), (o, m_dis)];
            t2.extend(relax.terms.iter().copied());
            let rhs2 = g_ca - 2.0 * m_dis - relax.constant;
            pending.push((format!("sep{tag}_w{}_f{ida}_f{idc}_ba", wname(j)), t2, rhs2));
        }
        for (name, terms, rhs) in pending {
            b.row(name, "separation", terms, Sense::Ge, rhs);
            b.big_m("separation", m_dis, "T_max + max gap");
        }
        for &lx in net.out_links(j) {
            let (Some(xa), Some(xc)) = (lay.x[a][lx], lay.x[c][lx]) else {
                continue;
            };
            let k_to = net.link_endpoints(lx).1;
            let ara = lay.ar[a][k_to].expect("visited");
            let arc = lay.ar[c][k_to].expect("visited");
            let name = format!("rear_f{ida}_f{idc}_{}", lname(lx));
            b.row(
                format!("{name}_ab"),
                "rear_end",
                vec![
                    (arc, 1.0),
                    (ara, -1.0),
                    (o, -m_dis),
                    (xa, -m_dis),
                    (xc, -m_dis),
                ],
                Sense::Ge,
                gap_ac - 3.0 * m_dis,
            );
            b.big_m("rear_end", m_dis, "T_max + max gap");
            b.row(
                format!("{name}_ba"),
                "rear_end",
                vec![
                    (ara, 1.0),
                    (arc, -1.0),
                    (o, m_dis),
                    (xa, -m_dis),
                    (xc, -m_dis),
                ],
                Sense::Ge,
                gap_ca - 2.0 * m_dis,
            );
            b.big_m("rear_end", m_dis, "T_max + max gap");
        }
    }

    for (pi, p) in sp.frozen.iter().enumerate() {
        let j = p.waypoint;
        for (k, f) in sp.flights.iter().enumerate() {
            if f.id == p.flight || !f.visits[j] {
                continue;
            }
            let g = sp.frozen_gap(p, k);
            let id = f.id.0;
            let dp = lay.dp[k][j].expect("visited");
            if f.anchor == j {
                if !f.fixed_dp && !f.exempt {
                    b.row(
                        format!("frzD_p{pi}_f{id}"),
                        "frozen",
                        vec![(dp, 1.0)],
                        Sense::Ge,
                        p.departure + g,
                    );
                }
                continue;
            }
            let ar = lay.ar[k][j].expect("visited");
            let v = visit(&lay, k, j);
            let mut ta = vec![(ar, 1.0)];
            ta.extend(v.terms.iter().map(|&(x, c)| (x, -c * (p.arrival + g))));
            b.row(format!("frzA_p{pi}_f{id}"), "frozen", ta, Sense::Ge, 0.0);
            let mut td = vec![(dp, 1.0)];
            td.extend(v.terms.iter().map(|&(x, c)| (x, -c * (p.departure + g))));
            b.row(format!("frzD_p{pi}_f{id}"), "frozen", td, Sense::Ge, 0.0);
        }
    }

    for (a, fa) in sp.flights.iter().enumerate() {
        let Some(p) = fa.via else { continue };
        let Some(lx) = net.link_between(p, fa.anchor) else {
            continue;
        };
        for (c, fc) in sp.flights.iter().enumerate() {
            if c == a {
                continue;
            }
            let Some(x) = lay.x[c][lx] else { continue };
            let ar = lay.ar[c][fa.anchor].expect("visited");
            b.row(
                format!("occ_f{}_f{}", fa.id.0, fc.id.0),
                "occupancy",
                vec![(ar, 1.0), (x, -(fa.arrival + sp.gap(a, c)))],
                Sense::Ge,
                0.0,
            );
        }
    }

    if nf > 0 {
        let w = 1.0 / nf as f64;
        for k in 0..nf {
            for j in 0..nw {
                if net.is_runway(j) {
                    if let Some(ar) = lay.ar[k][j] {
                        b.inst.objective.push((ar, w));
                    }
                }
            }
        }
    }
    b.inst.layout = lay;
    b.inst
}

#[cfg(test)]
mod tests {
    use super::super::testkit::scenario;
    use super::super::*;
    use crate::network::fixtures::{diamond, line};

    #[test]
    fn single_flight_has_no_order_binaries() {
        let scn = scenario(line(&[4.0]), &[(1, 1, 0.0)], 60.0, 600.0);
        let (_, inst) = encode(&HorizonProblem::from_scenario(&scn)).unwrap();
        assert!(inst.variables.iter().all(|v| !v.name.starts_with("o_")));
        // 2 links, 2 speed vars, 3 waypoints x 3 time vars
        assert_eq!(inst.variables.len(), 2 + 2 + 9);
    }

    #[test]
    fn variable_count_matches_closed_form() {
        let scn = scenario(
            diamond(&[4.0, 5.0]),
            &[(1, 1, 0.0), (2, 1, 30.0), (3, 1, 90.0)],
            60.0,
            600.0,
        );
        let (_, inst) = encode(&HorizonProblem::from_scenario(&scn)).unwrap();
        let (f, l, w, levels) = (3, 4, 4, 2);
        let pairs = f * (f - 1) / 2;
        let expected = l * f + l * f * levels + 3 * w * f + pairs * w;
        assert_eq!(inst.variables.len(), expected);
        assert_eq!(expected, 84);
        let mut names: Vec<&str> = inst.variables.iter().map(|v| v.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), expected);
    }

    #[test]
    fn rows_reference_declared_variables() {
        let scn = scenario(
            diamond(&[4.0, 5.0]),
            &[(1, 1, 0.0), (2, 1, 30.0)],
            60.0,
            600.0,
        );
        let (_, inst) = encode(&HorizonProblem::from_scenario(&scn)).unwrap();
        for r in &inst.rows {
            assert!(r
                .coeffs
                .iter()
                .all(|&(v, c)| v < inst.variables.len() && c.is_finite()));
        }
        for m in &inst.big_m {
            assert!(m.value.is_finite() && m.value > 0.0);
        }
        assert_eq!(inst.rows.iter().filter(|r| r.family == "sink").count(), 1);
    }

    #[test]
    fn encoding_is_deterministic() {
        let net = Arc::new(crate::network::sample_network());
        let scn = crate::scenario::generate_scenario(net, 6, 600.0, 60.0, 9).unwrap();
        let hp = HorizonProblem::from_scenario(&scn);
        let a = export_milp(&encode(&hp).unwrap().1, "lp").unwrap();
        let b = export_milp(&encode(&hp).unwrap().1, "lp").unwrap();
        assert_eq!(a, b);
    }
}
