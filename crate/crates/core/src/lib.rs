//! Bi-objective traveling thief solver: ε-constraint scalarization over
//! constrained quadratic models, sampled by simulated annealing and refined
//! with a picking-plan heuristic.

pub mod cqm;
pub mod encoder;
pub mod instance;
pub mod knapsack;
pub mod lea;
pub mod model;
pub mod oracle;
pub mod pareto;
pub mod solver;
