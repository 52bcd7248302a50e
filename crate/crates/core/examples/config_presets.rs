//! Resolving run configurations: a preset, a TOML layer on top and flag
//! overrides last. Prints the merged result as the CLI would embed it in
//! its output headers.
//!
//! Run: cargo run --release --example config_presets [preset]

use vdpsync::cli::{resolve, Overrides, PRESETS};

fn main() -> vdpsync::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "fig2a".into());
    println!("presets: {}", PRESETS.join(", "));

    let layer: toml::Value = toml::from_str(
        r#"
        [ensemble]
        n_trajectories = 250

        [physics]
        theta = 0.5
        "#,
    )
    .expect("static toml");
    let overrides = Overrides {
        preset: Some(name),
        seed: Some(42),
        ..Overrides::default()
    };
    let cfg = resolve(Some(layer), &overrides)?;
    cfg.validate()?;
    println!("{}", cfg.to_json());
    for v in &cfg.variants {
        let p = cfg.variant_params(v)?;
        println!("variant {:<6} dw {:.3} V {:.3} theta {:.3}", v.label, p.delta_omega(), p.coupling, p.theta);
    }
    Ok(())
}
