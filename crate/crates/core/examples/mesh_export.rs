//! Builds a fine mesh and its coarse observation partition and writes both
//! in the plain-text mesh format.
//!
//! cargo run --example mesh_export -- 12 3 /tmp/mesh

use std::path::PathBuf;

use cda_fem::mesh::{build_coarse_partition, build_uniform_mesh};

fn main() -> cda_fem::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(12, |s| s.parse().expect("n"));
    let ratio: usize = args.next().map_or(3, |s| s.parse().expect("ratio"));
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "mesh_out".into()));
    std::fs::create_dir_all(&dir).expect("output directory");

    let mesh = build_uniform_mesh(n)?;
    let part = build_coarse_partition(&mesh, ratio)?;
    println!(
        "fine: {} vertices, {} edges, {} cells, h = {}",
        mesh.num_vertices(),
        mesh.num_edges(),
        mesh.num_cells(),
        mesh.h()
    );
    let coarse = part.coarse_mesh();
    println!("coarse: {} cells, H = {}", coarse.num_cells(), part.h_coarse());

    let children = part.coarse_to_fine();
    let sizes: Vec<usize> = children.iter().map(Vec::len).collect();
    println!("fine cells per coarse cell: {:?}", sizes.iter().min().zip(sizes.iter().max()));

    mesh.export(dir.join("fine.mesh"))?;
    coarse.export(dir.join("coarse.mesh"))?;
    println!("wrote {}", dir.display());
    Ok(())
}
