//! Principal angles, the Grassmann distance and its indifference to the
//! chosen basis.

use gridless_doa::losses::{grassmann_distance, principal_angles};
use gridless_doa::random_matrices::random_unitary;
use gridless_doa::SubspaceBasis;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gridless_doa::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (m, k) = (7, 3);
    let u = SubspaceBasis::new(random_unitary(&mut rng, m).columns(0, k).into_owned())?;
    let v = SubspaceBasis::new(random_unitary(&mut rng, m).columns(0, k).into_owned())?;

    println!("principal angles {:.6?}", principal_angles(&u, &v)?);
    println!("distance         {:.12}", grassmann_distance(&u, &v)?);
    for _ in 0..3 {
        let u2 = u.rotated(&random_unitary(&mut rng, k))?;
        let v2 = v.rotated(&random_unitary(&mut rng, k))?;
        println!("new bases        {:.12}", grassmann_distance(&u2, &v2)?);
    }
    println!(
        "to itself        {:.3e}",
        grassmann_distance(&u, &u.rotated(&random_unitary(&mut rng, k))?)?
    );
    Ok(())
}
