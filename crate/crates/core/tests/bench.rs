use fourwire::bench::{
    balanced_bound_active, evaluate_setpoints, load_instances, run_matrix, setpoints_for, synthesize_case, violation_pct,
    CaseSpec, DgCapacity, Instance, MatrixOptions, ViolationReport,
};
use fourwire::fixtures::{self, wye_load};
use fourwire::form::{Form, FormulationConfig};
use fourwire::netmodel::{json, Network};
use fourwire::reduce::Model;
use fourwire::solve::{run_opf, SolverOptions, Start};

fn instances() -> Vec<Instance> {
    ["f1-opf", "f2-opf"].iter().map(|n| Instance { name: n.to_string(), network: fixtures::by_name(n).unwrap() }).collect()
}

fn untimed() -> MatrixOptions {
    MatrixOptions { timing: false, ..MatrixOptions::default() }
}

fn csv_bytes(r: &ViolationReport) -> Vec<u8> {
    let mut out = Vec::new();
    r.write_csv(&mut out).unwrap();
    out
}

#[test]
fn rows_follow_instance_model_form_order() {
    let r = run_matrix(&instances()[..1], &[Form::Ivr, Form::Acr], &Model::ALL, &untimed());
    assert_eq!(r.rows.len(), 6);
    let keys: Vec<(Model, Form)> = r.rows.iter().map(|r| (r.model, r.form)).collect();
    assert_eq!(keys[0], (Model::FourWire, Form::Ivr));
    assert_eq!(keys[1], (Model::FourWire, Form::Acr));
    assert_eq!(keys[5], (Model::Balanced, Form::Acr));
    assert!(!r.has_numerical_failure());
}

#[test]
fn untimed_reports_are_byte_identical() {
    let a = run_matrix(&instances(), &[Form::Ivr, Form::Acr], &Model::ALL, &untimed());
    let b = run_matrix(&instances(), &[Form::Ivr, Form::Acr], &Model::ALL, &untimed());
    assert_eq!(csv_bytes(&a), csv_bytes(&b));
    assert!(a.rows.iter().all(|r| r.solve_time.is_none()));
}

#[test]
fn report_columns_are_consistent() {
    let r = run_matrix(&instances(), &[Form::Ivr], &Model::ALL, &untimed());
    let back = ViolationReport::read_csv(csv_bytes(&r).as_slice()).unwrap();
    assert_eq!(back.rows.len(), r.rows.len());
    let header = String::from_utf8(csv_bytes(&r)).unwrap();
    assert!(header.starts_with("instance,model,form,buses,variables,status,objective,iterations,solve_time,eval_status,"));
    for row in &back.rows {
        assert_eq!(row.status, "optimal", "{row:?}");
        assert_eq!(row.eval_status, "ok");
        let (pn, b, pct) = (row.max_pn.unwrap(), row.bound.unwrap(), row.violation_pct.unwrap());
        assert!((violation_pct(pn, b) - pct).abs() < 1e-9, "{row:?}");
    }
    assert!(back.ordering_exceptions().is_empty());
}

#[test]
fn four_wire_setpoints_evaluate_without_violation() {
    for inst in instances() {
        let (f, sol) =
            run_opf(&inst.network, Form::Ivr, &FormulationConfig::default(), &SolverOptions::default(), Start::NoLoad).unwrap();
        let sp = setpoints_for(&inst.network, &f.net, sol.recovered.as_ref().unwrap()).unwrap();
        let e = evaluate_setpoints(&inst.network, &sp, &SolverOptions::default()).unwrap();
        assert!(e.violation_pct.unwrap() < 1e-6, "{}: {e:?}", inst.name);
    }
}

#[test]
fn timing_fit_needs_two_sizes() {
    let mut r = run_matrix(&instances(), &[Form::Ivr], &[Model::FourWire], &MatrixOptions::default());
    let fit = r.solve_time_fit(Model::FourWire, Form::Ivr).unwrap();
    assert_eq!(fit.points, 2);
    r.rows.truncate(1);
    assert!(r.solve_time_fit(Model::FourWire, Form::Ivr).is_none());
    let js: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    assert_eq!(js["rows"].as_array().unwrap().len(), 1);
}

#[test]
fn failed_build_is_recorded() {
    let mut net = fixtures::f1_opf();
    net.lines.get_mut("l1").unwrap().linecode = "missing".into();
    let r = run_matrix(&[Instance { name: "broken".into(), network: net }], &[Form::Ivr], &[Model::FourWire], &untimed());
    assert_eq!(r.rows[0].status, "error");
    assert_eq!(r.rows[0].eval_status, "skipped");
    assert!(!r.rows[0].message.is_empty());
}

fn eight_load_feeder() -> Network {
    let mut net = fixtures::chain(9);
    for k in 1..=8 {
        let p = 1000.0 + 250.0 * k as f64;
        net.add_load(wye_load(&format!("d{k}"), &format!("b{k}"), [p, 0.5 * p, 0.8 * p], [0.2 * p, 0.1 * p, 0.15 * p]));
    }
    net
}

#[test]
fn synthesized_dgs_sit_on_every_fourth_load() {
    let net = eight_load_feeder();
    let opts = SolverOptions::default();
    let case = synthesize_case(&net, &CaseSpec::default(), &opts).unwrap();
    assert_eq!(case.dgs, vec!["dg.d4", "dg.d8"]);
    let g4 = &case.network.generators["dg.d4"];
    let g8 = &case.network.generators["dg.d8"];
    assert_eq!(g4.p_max, g8.p_max);
    assert_eq!(g4.bus, "b4");
    assert!((g4.cost - 0.1 * net.sources.values().next().unwrap().cost).abs() < 1e-12);
    assert!(balanced_bound_active(&case.network, &opts).unwrap());

    // just below the returned capacity the bound is slack
    let below = CaseSpec { capacity: DgCapacity::Fixed(case.capacity * 0.97), ..CaseSpec::default() };
    let smaller = synthesize_case(&net, &below, &opts).unwrap();
    assert!(!balanced_bound_active(&smaller.network, &opts).unwrap());
}

#[test]
fn loads_instance_directory_in_name_order() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["f2", "f1"] {
        std::fs::write(dir.path().join(format!("{name}.json")), json::to_string(&fixtures::by_name(name).unwrap()).unwrap())
            .unwrap();
    }
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let list = load_instances(dir.path()).unwrap();
    let names: Vec<&str> = list.iter().map(|i| i.name.as_str()).collect();
    assert_eq!(names, ["f1", "f2"]);
}
