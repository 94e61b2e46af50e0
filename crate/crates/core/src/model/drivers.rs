//! Greedy driver assignment.
//!
//! Drivers are not part of any genome. Each evaluation walks the vehicles in
//! index order and staffs every non-empty chain first-fit from the drivers
//! still free, in declaration order. Unmet requirements become fault counts.

use std::collections::BTreeSet;

use super::problem::{chain_orders, Problem};
use super::types::StopVisit;

/// Tracks which drivers are already on a tour within one solution.
#[derive(Clone, Debug)]
pub struct DriverPool {
    used: Vec<bool>,
}

impl DriverPool {
    pub fn new(problem: &Problem) -> Self {
        Self {
            used: vec![false; problem.instance().drivers.len()],
        }
    }

    pub fn is_used(&self, d: usize) -> bool {
        self.used[d]
    }

    /// Staffs `chain` (served by vehicle `vehicle`) and marks the chosen drivers used.
    ///
    /// One driver is selected, two if any order on the chain needs a co-driver
    /// (or names two different required drivers). Explicitly required drivers
    /// are taken first; remaining seats go to the first free driver covering
    /// all still-missing certificates, else the one covering the most.
    ///
    /// Faults: one per order whose required driver, certificate set or
    /// co-driver need is unmet by the final team, plus one for a non-empty
    /// chain left without any driver. When the instance models no drivers at
    /// all, only explicit order requirements count.
    pub fn assign(&mut self, problem: &Problem, chain: &[StopVisit], _vehicle: usize) -> (Vec<usize>, u32) {
        let orders = chain_orders(problem, chain);
        if orders.is_empty() {
            return (Vec::new(), 0);
        }
        let drivers = &problem.instance().drivers;
        let needs_co = orders.iter().any(|&o| problem.order(o).needs_codriver);
        let mut required: Vec<usize> = Vec::new();
        for &o in &orders {
            if let Some(d) = problem.required_driver(o) {
                if !required.contains(&d) {
                    required.push(d);
                }
            }
        }
        let certs: BTreeSet<&String> = orders
            .iter()
            .flat_map(|&o| problem.order(o).required_certificates.iter())
            .collect();

        let mut team: Vec<usize> = Vec::new();
        if !drivers.is_empty() {
            let seats = if needs_co { 2 } else { 1 }.max(required.len().min(2));
            for &d in &required {
                if team.len() < 2 && !self.used[d] {
                    team.push(d);
                }
            }
            while team.len() < seats {
                let covered: BTreeSet<&String> = team.iter().flat_map(|&d| drivers[d].certificates.iter()).collect();
                let missing: Vec<&String> = certs.iter().copied().filter(|c| !covered.contains(c)).collect();
                let free = (0..drivers.len()).filter(|d| !self.used[*d] && !team.contains(d));
                let mut best: Option<(usize, usize)> = None;
                for d in free {
                    let hits = missing.iter().filter(|c| drivers[d].certificates.contains(**c)).count();
                    if hits == missing.len() {
                        best = Some((d, hits));
                        break;
                    }
                    if best.is_none_or(|(_, h)| hits > h) {
                        best = Some((d, hits));
                    }
                }
                match best {
                    Some((d, _)) => team.push(d),
                    None => break,
                }
            }
            for &d in &team {
                self.used[d] = true;
            }
        }

        let covered: BTreeSet<&String> = team.iter().flat_map(|&d| drivers[d].certificates.iter()).collect();
        let mut faults = 0;
        if team.is_empty() && !drivers.is_empty() {
            faults += 1;
        }
        for &o in &orders {
            let order = problem.order(o);
            if problem.required_driver(o).is_some_and(|d| !team.contains(&d)) {
                faults += 1;
            }
            if !order.required_certificates.iter().all(|c| covered.contains(c)) {
                faults += 1;
            }
            if order.needs_codriver && team.len() < 2 {
                faults += 1;
            }
        }
        (team, faults)
    }
}

/// Staffs all chains of a solution in vehicle order.
pub fn assign_drivers(problem: &Problem, chains: &[Vec<StopVisit>]) -> (Vec<Vec<usize>>, u32) {
    let mut pool = DriverPool::new(problem);
    let mut faults = 0;
    let teams = chains
        .iter()
        .enumerate()
        .map(|(v, chain)| {
            let (team, f) = pool.assign(problem, chain, v);
            faults += f;
            team
        })
        .collect();
    (teams, faults)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;

    fn problem(drivers: Vec<Driver>, tweak: impl Fn(&mut Order)) -> Problem {
        let mut order = Order::simple("o1", "d", "c", Amount::default());
        tweak(&mut order);
        let inst = Instance {
            name: None,
            locations: vec![
                Location { id: "d".into(), x: 0.0, y: 0.0 },
                Location { id: "c".into(), x: 1.0, y: 0.0 },
            ],
            vehicles: vec![
                Vehicle::simple("v1", "d", Amount::default()),
                Vehicle::simple("v2", "d", Amount::default()),
            ],
            trailers: vec![],
            drivers,
            orders: vec![order],
            pause_rules: vec![],
            max_runtime_s: 1,
            distance: Default::default(),
        };
        Problem::from_instance(inst, None).unwrap()
    }

    fn driver(id: &str, certs: &[&str]) -> Driver {
        Driver { id: id.into(), certificates: certs.iter().map(|c| c.to_string()).collect() }
    }

    fn loaded_chain(p: &Problem) -> Vec<StopVisit> {
        vec![
            StopVisit::new(p.tour_begin(0), 0),
            StopVisit::new(0, 0),
            StopVisit::new(1, 0),
            StopVisit::new(p.tour_end(0), 0),
        ]
    }

    #[test]
    fn unconstrained_gets_one_driver() {
        let p = problem(vec![driver("a", &[]), driver("b", &[])], |_| {});
        let mut pool = DriverPool::new(&p);
        assert_eq!(pool.assign(&p, &loaded_chain(&p), 0), (vec![0], 0));
        assert!(pool.is_used(0));
    }

    #[test]
    fn missing_certificate_is_one_fault() {
        let drivers = vec![driver("a", &["hazmat"]), driver("b", &[])];
        let p = problem(drivers.clone(), |o| {
            o.required_certificates.insert("firearm".into());
        });
        // exhaustive check: no single driver holds the certificate
        assert!(drivers.iter().all(|d| !d.certificates.contains("firearm")));
        let (team, faults) = DriverPool::new(&p).assign(&p, &loaded_chain(&p), 0);
        assert_eq!((team.len(), faults), (1, 1));
    }

    #[test]
    fn codriver_takes_two() {
        let p = problem(vec![driver("a", &[]), driver("b", &[])], |o| o.needs_codriver = true);
        assert_eq!(DriverPool::new(&p).assign(&p, &loaded_chain(&p), 0), (vec![0, 1], 0));
    }

    #[test]
    fn certificate_holder_preferred() {
        let p = problem(vec![driver("a", &[]), driver("b", &["firearm"])], |o| {
            o.required_certificates.insert("firearm".into());
        });
        assert_eq!(DriverPool::new(&p).assign(&p, &loaded_chain(&p), 0), (vec![1], 0));
    }

    #[test]
    fn empty_chain_needs_nobody() {
        let p = problem(vec![driver("a", &[])], |_| {});
        assert_eq!(DriverPool::new(&p).assign(&p, &p.empty_chain(1), 1), (vec![], 0));
    }

    #[test]
    fn drivers_never_shared() {
        let p = problem(vec![driver("a", &[])], |_| {});
        let mut pool = DriverPool::new(&p);
        assert_eq!(pool.assign(&p, &loaded_chain(&p), 0).0, vec![0]);
        // second loaded chain finds nobody
        let mut chain = p.empty_chain(1);
        chain.insert(1, StopVisit::new(1, 0));
        chain.insert(1, StopVisit::new(0, 0));
        assert_eq!(pool.assign(&p, &chain, 1), (vec![], 1));
    }
}
