use rank2geom::constructors::{polar_extension, section_map, PolarSurfaceInput, PolyTable, SurfaceFamily};
use rank2geom::immersion::DomainBox;
use rank2geom::parabolic::analyze_point;
use rank2geom::Tolerances;

fn h_at(map: &rank2geom::constructors::SectionMap, p: &[f64]) -> Vec<f64> {
    map.local(p, 1).unwrap().h.iter().map(|c| c.value()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `h_*(∂i)` and `g_*(∂j)` by central differences of point values only.
fn fd_section_residual(map: &rank2geom::constructors::SectionMap, p: &[f64]) -> f64 {
    let step = 1e-5;
    let shift = |i: usize, s: f64| {
        let mut q = p.to_vec();
        q[i] += s;
        q
    };
    let g = map.surface();
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        let (hp, hm) = (h_at(map, &shift(i, step)), h_at(map, &shift(i, -step)));
        let dh: Vec<f64> = hp.iter().zip(&hm).map(|(a, b)| (a - b) / (2.0 * step)).collect();
        for j in 0..2 {
            let (gp, gm) = (g.eval_point(&shift(j, step)).unwrap(), g.eval_point(&shift(j, -step)).unwrap());
            let dg: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * step)).collect();
            worst = worst.max(dot(&dh, &dg).abs());
        }
    }
    worst
}

fn graph_input(phi: PolyTable) -> PolarSurfaceInput {
    PolarSurfaceInput {
        surface: SurfaceFamily::RuledGraph { n: 2 },
        domain: DomainBox::cube(2, 0.5),
        phi,
        gamma0: vec![],
        half_width: 0.2,
    }
}

#[test]
fn coordinate_potential_satisfies_the_section_condition() {
    let tol = Tolerances::default();
    let map = section_map(&graph_input(PolyTable::monomial(1.0, &[1, 0])), &tol).unwrap();
    for p in DomainBox::cube(2, 0.4).grid(&[4, 4]).unwrap() {
        let r = fd_section_residual(&map, &p);
        assert!(r < 1e-8, "{r:.2e} at {p:?}");
    }
}

#[test]
fn fd_oracle_agrees_on_the_heat_section() {
    let tol = Tolerances::default();
    let map = section_map(&PolarSurfaceInput::heat_example(3), &tol).unwrap();
    let smooth = DomainBox::new(vec![-0.45, -0.25], vec![-0.2, 0.2]).unwrap();
    for p in smooth.grid(&[3, 3]).unwrap() {
        let r = fd_section_residual(&map, &p);
        assert!(r < 1e-6, "{r:.2e} at {p:?}");
    }
}

#[test]
fn constant_potential_gives_the_zero_section() {
    let tol = Tolerances::default();
    let map = section_map(&graph_input(PolyTable::monomial(2.5, &[0, 0])), &tol).unwrap();
    for p in DomainBox::cube(2, 0.4).grid(&[3, 3]).unwrap() {
        assert!(h_at(&map, &p).iter().all(|v| v.abs() < 1e-14));
    }
}

#[test]
fn zero_data_collapses_the_zero_slice() {
    let tol = Tolerances::default();
    let mut input = PolarSurfaceInput::heat_example(3);
    input.phi = PolyTable::default();
    input.gamma0 = vec![];
    let psi = polar_extension(section_map(&input, &tol).unwrap(), 0.2).unwrap();
    // Ψ = tδ vanishes identically on t = 0
    for p in DomainBox::cube(2, 0.4).grid(&[3, 3]).unwrap() {
        let q = [p[0], p[1], 0.0];
        assert!(psi.chart.eval_point(&q).unwrap().iter().all(|v| v.abs() < 1e-15));
        assert!(!analyze_point(&psi.chart, &q, &tol).accepted());
    }
}
