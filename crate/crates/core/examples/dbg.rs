use toda_lab::experiments::*;
use toda_lab::grid::*;
use toda_lab::rootsys::*;
use toda_lab::toda::*;

fn main() {
    let rs = build_root_system(LieType::A, 3).unwrap();
    let coupling = CouplingSpec::folded_from(rs).unwrap();
    let g = TorusGrid::new(64, 2.0 * std::f64::consts::PI).unwrap();
    let mut divisors = vec![Divisor::empty(); 3];
    divisors[0] = Divisor::single(32, 32, 1);
    let spec = ProblemSpec::new(Mode::Variant, 1.0, divisors);
    let problem = assemble(&coupling, &g, &spec).unwrap();
    let v = monotonicity_experiment(&problem, &[0.5, 1.0, 2.0], &SolveParams::default()).unwrap();
    println!("pass={} margin={:.6}", v.pass, v.margin);
    println!("{}", serde_json::to_string_pretty(&v.metadata).unwrap());
}
