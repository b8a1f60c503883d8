use freeshell::fixtures;
use freeshell::flatten::{read_layout, run_discrete_flattening, write_layout, FlattenConfig};
use freeshell::mesh::{load_mesh, save_mesh, MeshFormat};
use freeshell::plate::{export_layout_svg, export_plate_mesh, generate_plate, PlateParams};

#[test]
fn saved_layout_and_mesh_rebuild_the_same_plate() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = fixtures::hemisphere();
    let o = run_discrete_flattening(&mesh, &FlattenConfig::default()).unwrap();
    let (lp, mp) = (dir.path().join("layout.txt"), dir.path().join("mesh.obj"));
    write_layout(&o.layout, &lp).unwrap();
    save_mesh(&mesh, &mp, MeshFormat::Obj).unwrap();
    let (layout, reloaded) = (read_layout(&lp).unwrap(), load_mesh(&mp).unwrap());
    assert_eq!(layout, o.layout);
    assert_eq!(reloaded.vertices(), mesh.vertices());
    let a = generate_plate(&o.layout, &mesh, &PlateParams::default()).unwrap();
    let b = generate_plate(&layout, &reloaded, &PlateParams::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn plate_files_group_every_solid() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = fixtures::tri_lattice(3, 2, 10.0);
    let o = run_discrete_flattening(&mesh, &FlattenConfig::default()).unwrap();
    let plate = generate_plate(&o.layout, &mesh, &PlateParams::default()).unwrap();
    let obj = dir.path().join("plate.obj");
    export_plate_mesh(&plate, &obj, MeshFormat::Obj).unwrap();
    let text = std::fs::read_to_string(&obj).unwrap();
    let groups: Vec<&str> = text.lines().filter_map(|l| l.strip_prefix("g ")).collect();
    assert_eq!(groups.len(), plate.tiles.len() + plate.connectors.len());
    assert!(groups
        .iter()
        .take(plate.tiles.len())
        .all(|g| g.starts_with("tile_")));
    let faces = text.lines().filter(|l| l.starts_with("f ")).count();
    let stl = dir.path().join("plate.stl");
    export_plate_mesh(&plate, &stl, MeshFormat::Stl).unwrap();
    let bytes = std::fs::read(&stl).unwrap();
    assert_eq!(
        u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize,
        faces
    );
    let svg = dir.path().join("plate.svg");
    export_layout_svg(&o.layout, &plate, &svg).unwrap();
    let first = std::fs::read(&svg).unwrap();
    export_layout_svg(&o.layout, &plate, &svg).unwrap();
    assert_eq!(std::fs::read(&svg).unwrap(), first);
}
