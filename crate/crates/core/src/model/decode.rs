use super::milp::{MilpInstance, VarKind};
use super::{StructuredProblem, TOLERANCE};
use crate::network::WaypointId;
use crate::scenario::FlightId;
use crate::schedule::{FlightSchedule, Schedule};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("route discontinuity for flight {flight} at waypoint {waypoint}")]
    RouteDiscontinuity {
        flight: FlightId,
        waypoint: WaypointId,
    },
    #[error("{family} constraint {row} violated by {magnitude}")]
    Violated {
        family: String,
        row: String,
        magnitude: f64,
    },
    #[error("schedule does not cover flight {0}")]
    MissingFlight(FlightId),
    #[error("schedule route for flight {0} leaves the encoded network")]
    OutsideEncoding(FlightId),
}

/// Turn a flat solution vector into a schedule, checking every row.
pub fn decode(
    sp: &StructuredProblem,
    inst: &MilpInstance,
    values: &[f64],
) -> Result<Schedule, DecodeError> {
    if values.len() != inst.variables.len() {
        return Err(DecodeError::Length {
            expected: inst.variables.len(),
            got: values.len(),
        });
    }
    let net = &sp.net;
    let lay = &inst.layout;
    let mut routes = Vec::with_capacity(sp.flights.len());
    for (k, f) in sp.flights.iter().enumerate() {
        let mut nodes = vec![f.anchor];
        let mut levels = Vec::new();
        let mut at = f.anchor;
        while !net.is_runway(at) {
            let used: Vec<usize> = net
                .out_links(at)
                .iter()
                .copied()
                .filter(|&lx| lay.x[k][lx].is_some_and(|v| values[v] > 0.5))
                .collect();
            if used.len() != 1 {
                return Err(DecodeError::RouteDiscontinuity {
                    flight: f.id,
                    waypoint: net.id(at),
                });
            }
            let lx = used[0];
            let level = lay.d[k][lx].iter().position(|&v| values[v] > 0.5);
            levels.push(level.unwrap_or(0));
            at = net.link_endpoints(lx).1;
            nodes.push(at);
        }
        routes.push((nodes, levels));
    }

    for (v, var) in inst.variables.iter().enumerate() {
        let x = values[v];
        let out = (var.lower - x).max(x - var.upper).max(0.0);
        let frac = match var.kind {
            VarKind::Binary => (x - x.round()).abs(),
            VarKind::Continuous => 0.0,
        };
        if out > TOLERANCE || frac > TOLERANCE {
            return Err(DecodeError::Violated {
                family: "bounds".into(),
                row: var.name.clone(),
                magnitude: out.max(frac),
            });
        }
    }
    for r in &inst.rows {
        let scale = 1.0 + r.rhs.abs().max(1.0) * 1e-12;
        let viol = r.violation(values);
        if viol > TOLERANCE * scale {
            return Err(DecodeError::Violated {
                family: r.family.into(),
                row: r.name.clone(),
                magnitude: viol,
            });
        }
    }

    let flights = sp
        .flights
        .iter()
        .enumerate()
        .zip(routes)
        .map(|((k, f), (nodes, levels))| {
            let arrival: Vec<f64> = nodes
                .iter()
                .map(|&j| values[lay.ar[k][j].unwrap()])
                .collect();
            let departure: Vec<f64> = nodes
                .iter()
                .map(|&j| values[lay.dp[k][j].unwrap()])
                .collect();
            let holding = nodes
                .iter()
                .map(|&j| values[lay.ht[k][j].unwrap()])
                .collect();
            FlightSchedule {
                flight: f.id,
                route: nodes.iter().map(|&j| net.id(j)).collect(),
                landing_time: *arrival.last().unwrap(),
                arrival,
                departure,
                holding,
                speed_levels: levels,
            }
        })
        .collect();
    Ok(Schedule::from_flights(flights))
}

/// Flat solution vector realizing a schedule; unused waypoint times are 0.
pub fn assignment_from_schedule(
    sp: &StructuredProblem,
    inst: &MilpInstance,
    sched: &Schedule,
) -> Result<Vec<f64>, DecodeError> {
    let net = &sp.net;
    let lay = &inst.layout;
    let mut values = vec![0.0; inst.variables.len()];
    let mut times: Vec<Vec<Option<(f64, f64)>>> = vec![vec![None; net.len()]; sp.flights.len()];
    for (k, f) in sp.flights.iter().enumerate() {
        let fs = sched.flight(f.id).ok_or(DecodeError::MissingFlight(f.id))?;
        let nodes: Option<Vec<usize>> = fs.route.iter().map(|&w| net.ix(w)).collect();
        let nodes = nodes.ok_or(DecodeError::OutsideEncoding(f.id))?;
        for (i, &j) in nodes.iter().enumerate() {
            let (Some(ar), Some(dp), Some(ht)) = (lay.ar[k][j], lay.dp[k][j], lay.ht[k][j]) else {
                return Err(DecodeError::OutsideEncoding(f.id));
            };
            values[ar] = fs.arrival[i];
            values[dp] = fs.departure[i];
            values[ht] = fs.departure[i] - fs.arrival[i];
            times[k][j] = Some((fs.arrival[i], fs.departure[i]));
            if i + 1 < nodes.len() {
                let lx = net
                    .link_between(j, nodes[i + 1])
                    .ok_or(DecodeError::OutsideEncoding(f.id))?;
                let x = lay.x[k][lx].ok_or(DecodeError::OutsideEncoding(f.id))?;
                values[x] = 1.0;
                let s = fs.speed_levels.get(i).copied().unwrap_or(0);
                let d = *lay.d[k][lx]
                    .get(s)
                    .ok_or(DecodeError::OutsideEncoding(f.id))?;
                values[d] = 1.0;
            }
        }
        if let Some(ar) = lay.ar[k][f.anchor] {
            values[ar] = f.arrival;
        }
    }
    for (&(j, a, c), &o) in &lay.order {
        let (Some(ta), Some(tc)) = (times[a][j], times[c][j]) else {
            continue;
        };
        let rule = sp.pair_rule(a, c, j);
        let g = sp.gap(a, c);
        let ar_ok = !rule.ar || tc.0 - ta.0 >= g - TOLERANCE;
        let dg = if rule.dp_gap { g } else { 0.0 };
        let dp_ok = tc.1 - ta.1 >= dg - TOLERANCE;
        values[o] = if ar_ok && dp_ok { 1.0 } else { 0.0 };
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::super::testkit::scenario;
    use super::super::*;
    use super::*;
    use crate::network::fixtures::line;

    fn line_problem(flights: &[(u32, u32, f64)]) -> (StructuredProblem, MilpInstance) {
        let scn = scenario(line(&[4.0]), flights, 60.0, 600.0);
        encode(&HorizonProblem::from_scenario(&scn)).unwrap()
    }

    fn set(inst: &MilpInstance, v: &mut [f64], name: &str, x: f64) {
        v[inst.var_index(name).unwrap_or_else(|| panic!("{name}"))] = x;
    }

    #[test]
    fn decodes_single_flight() {
        let (sp, inst) = line_problem(&[(1, 1, 0.0)]);
        let mut v = vec![0.0; inst.variables.len()];
        for n in ["x_f1_1_2", "x_f1_2_3", "d_f1_1_2_s0", "d_f1_2_3_s0"] {
            set(&inst, &mut v, n, 1.0);
        }
        for (w, t) in [(1, 0.0), (2, 40.0), (3, 80.0)] {
            set(&inst, &mut v, &format!("AR_f1_w{w}"), t);
            set(&inst, &mut v, &format!("DP_f1_w{w}"), t);
        }
        let s = decode(&sp, &inst, &v).unwrap();
        let f = &s.flights[0];
        assert_eq!(f.route, vec![WaypointId(1), WaypointId(2), WaypointId(3)]);
        assert_eq!(f.holding, vec![0.0; 3]);
        assert_eq!(f.landing_time, 80.0);
        assert_eq!(s.objective, 80.0);
    }

    #[test]
    fn broken_path_is_a_route_discontinuity() {
        let (sp, inst) = line_problem(&[(1, 1, 0.0)]);
        let mut v = vec![0.0; inst.variables.len()];
        set(&inst, &mut v, "x_f1_1_2", 1.0);
        assert!(matches!(
            decode(&sp, &inst, &v),
            Err(DecodeError::RouteDiscontinuity { .. })
        ));
    }

    #[test]
    fn reports_first_violated_family() {
        let (sp, inst) = line_problem(&[(1, 1, 0.0)]);
        let mut v = vec![0.0; inst.variables.len()];
        for n in ["x_f1_1_2", "x_f1_2_3", "d_f1_1_2_s0", "d_f1_2_3_s0"] {
            set(&inst, &mut v, n, 1.0);
        }
        for (w, t) in [(1, 0.0), (2, 30.0), (3, 70.0)] {
            set(&inst, &mut v, &format!("AR_f1_w{w}"), t);
            set(&inst, &mut v, &format!("DP_f1_w{w}"), t);
        }
        match decode(&sp, &inst, &v) {
            Err(DecodeError::Violated {
                family, magnitude, ..
            }) => {
                assert_eq!(family, "travel");
                assert!((magnitude - 10.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }
}
