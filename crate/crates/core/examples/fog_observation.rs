//! Renders what each side sees at the start of an episode: explored cells,
//! own units and visible enemies on the minimap.

use pursuit_arena::{Episode, EpisodeConfig, MapId, Observation};

fn draw(title: &str, obs: &Observation) {
    println!("{title} (camera at {},{}):", obs.scalars.camera.x, obs.scalars.camera.y);
    let m = &obs.minimap;
    for y in 0..m.height() {
        let row: String = (0..m.width())
            .map(|x| match (m.own_units[y][x], m.enemy_units[y][x], m.fog[y][x]) {
                (n, _, _) if n > 0 => 'O',
                (_, n, _) if n > 0 => 'X',
                (_, _, f) if f > 0 => '.',
                _ => ' ',
            })
            .collect();
        println!("|{row}|");
    }
    println!("available: {}\n", obs.available_actions.join(", "));
}

fn main() {
    let config = EpisodeConfig::for_map(MapId::FindAndDefeatZerglings).with_seed(1);
    let (_, pursuer, evader) = Episode::reset(config).expect("default config is valid");
    draw("pursuer view", &pursuer);
    draw("evader view", &evader);
}
