use canopy_core::allometry::{
    agb, carbon_and_co2e, dbh_from_crown, stand_totals, tree_biomass, AllometricModel, ModelRegistry, TreeBiomass,
    CO2_PER_C, DEFAULT_CARBON_FRACTION,
};
use canopy_core::numeric::neumaier_sum;
use canopy_core::species::default_species;
use proptest::prelude::*;

/// Produced by `oracle/allometry_oracle.py` at 50 significant digits.
const TABLE: &str = include_str!("oracle/allometry_table.csv");

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn matches_high_precision_table() {
    let mut sp = default_species().remove(0);
    sp.crown_dbh_a = 3.48;
    sp.crown_dbh_b = 1.20;
    let (wh, nh) = (AllometricModel::tropical_with_height(), AllometricModel::tropical_no_height());
    let mut rdr = csv::Reader::from_reader(TABLE.as_bytes());
    let mut n = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let f = |i: usize| rec[i].parse::<f64>().unwrap_or(f64::NAN);
        let expected = f(5);
        let got = match &rec[0] {
            "with_height" => agb(f(1), f(2), f(3), &wh).unwrap(),
            "no_height" => agb(f(1), 17.0, f(3), &nh).unwrap(),
            "bridge" => dbh_from_crown(f(4), &sp).unwrap(),
            "chain" => {
                sp.wood_density = f(3);
                tree_biomass(1, f(4), f(2), &sp, &wh, DEFAULT_CARBON_FRACTION).unwrap().agb_kg
            }
            k => panic!("unknown row kind {k}"),
        };
        assert!(rel(got, expected) <= 1e-9, "{:?}: {got} vs {expected}", rec);
        n += 1;
    }
    assert!(n >= 20);
}

#[test]
fn registry_models_are_the_built_ins() {
    let r = ModelRegistry::default();
    let ids: Vec<_> = r.ids().collect();
    assert_eq!(ids, ["tropical_no_height", "tropical_with_height"]);
}

#[test]
fn stand_sum_matches_naive_loop() {
    let trees: Vec<TreeBiomass> = (0..5000)
        .map(|i| {
            let a = 1.0 + (i as f64 * 0.618).fract() * 3000.0;
            let (c, e) = carbon_and_co2e(a, 0.47).unwrap();
            TreeBiomass { tree_id: i + 1, dbh_cm: 0.0, agb_kg: a, carbon_kg: c, co2e_kg: e }
        })
        .collect();
    let s = stand_totals(&trees, 4.0);
    let naive: f64 = trees.iter().map(|t| t.agb_kg).sum::<f64>() / 1000.0;
    assert!(rel(s.agb_total_mg, naive) < 1e-12);
    assert_eq!(s.agb_total_mg, neumaier_sum(trees.iter().map(|t| t.agb_kg)) / 1000.0);
    assert_eq!(s.agb_mg_per_ha, s.agb_total_mg / 4.0);
}

proptest! {
    #[test]
    fn agb_strictly_increasing(d in 0.0f64..200.0, dd in 1e-3f64..50.0, h in 1.0f64..60.0, dh in 1e-3f64..20.0,
                               rho in 0.15f64..1.1, drho in 1e-3f64..0.1) {
        let wh = AllometricModel::tropical_with_height();
        let nh = AllometricModel::tropical_no_height();
        for m in [&wh, &nh] {
            prop_assert!(agb(d + dd, h, rho, m).unwrap() > agb(d, h, rho, m).unwrap());
            if d > 0.0 {
                prop_assert!(agb(d, h, rho + drho, m).unwrap() > agb(d, h, rho, m).unwrap());
            }
        }
        if d > 0.0 {
            prop_assert!(agb(d, h + dh, rho, &wh).unwrap() > agb(d, h, rho, &wh).unwrap());
            prop_assert_eq!(agb(d, h + dh, rho, &nh).unwrap(), agb(d, h, rho, &nh).unwrap());
        }
    }

    #[test]
    fn carbon_chain_invariants(a in 0.0f64..1e7, frac in 0.3f64..0.6) {
        let (c, e) = carbon_and_co2e(a, frac).unwrap();
        prop_assert_eq!(c.to_bits(), (frac * a).to_bits());
        prop_assert_eq!(e.to_bits(), (c * CO2_PER_C).to_bits());
        if c > 0.0 {
            // The quotient cannot always round back to 44/12 in binary; one ulp is the best attainable.
            let q = e / c;
            prop_assert!((q - CO2_PER_C).abs() <= f64::EPSILON * CO2_PER_C);
        }
        prop_assert!(c >= 0.0 && e >= 0.0);
    }

    #[test]
    fn doubling_area_halves_densities(agbs in prop::collection::vec(0.0f64..5e4, 0..50), area in 0.01f64..1e4) {
        let trees: Vec<_> = agbs.iter().enumerate().map(|(i, &a)| {
            let (c, e) = carbon_and_co2e(a, 0.47).unwrap();
            TreeBiomass { tree_id: i as u32 + 1, dbh_cm: 0.0, agb_kg: a, carbon_kg: c, co2e_kg: e }
        }).collect();
        let s1 = stand_totals(&trees, area);
        let s2 = stand_totals(&trees, area * 2.0);
        prop_assert_eq!(s1.agb_total_mg, s2.agb_total_mg);
        prop_assert_eq!(s2.agb_mg_per_ha, s1.agb_mg_per_ha / 2.0);
        prop_assert_eq!(s2.co2e_t_per_ha, s1.co2e_t_per_ha / 2.0);
    }
}
