use nanoring::specfun::*;

// (order, x, J, Y, e^{-x} I, e^{x} K) at 40 digits, truncated to 17.
const REFERENCE: &[(u32, f64, f64, f64, f64, f64)] = &[
    (0, 0.001, 0.99999975000001562, -4.4714166113759233, 0.99900074958351556, 7.0307160023782515),
    (0, 0.05, 0.99937509764946858, -1.9793110008172096, 0.95182403579097663, 3.2739042225345419),
    (0, 0.5, 0.9384698072408129, -0.44451873350670656, 0.64503527044915007, 1.5241093857739095),
    (0, 1.0, 0.76519768655796655, 0.088256964215676958, 0.46575960759364044, 1.144463079806895),
    (0, 2.404825557695773, -6.1087652597367304e-17, 0.50992438344847907, 0.27629407792676803, 0.77330064538666002),
    (0, 3.7, -0.39923020337119112, 0.10607431532035411, 0.21604944167297372, 0.63221805919874067),
    (0, 7.9, 0.19436184484127824, 0.20652094814437577, 0.14436986414104192, 0.43930008190021521),
    (0, 8.1, 0.14751745404437767, 0.23809132870223481, 0.14251180948829528, 0.43399437543085675),
    (0, 12.5, 0.1468840547004211, -0.17121430684466929, 0.1140219294622889, 0.35109349766701513),
    (0, 19.0, 0.1466294396596512, -0.10951969138534148, 0.092144657211718758, 0.28569149437685856),
    (0, 24.9, 0.08324596835301549, -0.13649918399676524, 0.080359332611532214, 0.24993215015402474),
    (0, 25.1, 0.10827567149994945, -0.11676770763803695, 0.080035197254296236, 0.24894399546328753),
    (0, 40.0, 0.0073668905842372896, 0.12593641705826093, 0.06327827987523533, 0.19755558495729817),
    (0, 99.0, -0.054474235270499073, -0.058847076763805433, 0.040146123771164046, 0.12580466058253852),
    (0, 317.0, -0.020858619092434665, 0.039663330390020272, 0.022415682031816262, 0.070365426581927019),
    (0, 1000.0, 0.024786686152420175, 0.0047159179776228134, 0.012617240455891257, 0.039628321600754217),
    (1, 0.001, 0.00049999993750000261, -636.62216723113941, 0.00049950031235422135, 1000.9967345590684),
    (1, 0.05, 0.024992188313759701, -12.78985517117497, 0.02378816786654957, 20.930465157060079),
    (1, 0.5, 0.24226845767487389, -1.4714723926702431, 0.1564208031848717, 2.7310097082117857),
    (1, 1.0, 0.44005058574493352, -0.78121282130028872, 0.20791041534970845, 1.6361534862632582),
    (1, 2.404825557695773, 0.51914749728946676, 0.1027466824382596, 0.2083906631335745, 0.92177850836665473),
    (1, 3.7, 0.053833987745461791, 0.41667437268380749, 0.18383785802735623, 0.71300650104957612),
    (1, 7.9, 0.2191793999217512, -0.18172107728057313, 0.13489649943989377, 0.46631778473687991),
    (1, 8.1, 0.24760776698159288, -0.13314879595249593, 0.13340068832583663, 0.46004357075280574),
    (1, 12.5, -0.16548380461475972, -0.15383825653750118, 0.10936143099065089, 0.36487641350940624),
    (1, 19.0, -0.10570143114240927, -0.14956011386265329, 0.089686056821614962, 0.29311558766967166),
    (1, 24.9, -0.13485569953140887, -0.086002557595554252, 0.078728794882103129, 0.25490238558081709),
    (1, 25.1, -0.11463478413442257, -0.11062223322783099, 0.078424315178368414, 0.25385550089505651),
    (1, 40.0, 0.126038318037585, -0.0057935058215496329, 0.062482229074442061, 0.20000996725443348),
    (1, 99.0, -0.059122942553074067, 0.054177730033470983, 0.039942848299377563, 0.12643844912501998),
    (1, 317.0, 0.039630479778886745, 0.020921205340820628, 0.02238029809481675, 0.070476325805181888),
    (1, 1000.0, 0.0047283119070895239, -0.024784331292351779, 0.012610930256928629, 0.03964813081296021),
    (2, 0.001, 1.2499998958333366e-7, -1273239.8630456674, 1.2487507288542741e-7, 2002000.4998341392),
    (2, 0.05, 0.00031243490091938447, -509.61489584618155, 0.00029732112899386874, 840.49251050493765),
    (2, 0.5, 0.030604023458682641, -5.4413708371742657, 0.01935205770966328, 12.448148218621052),
    (2, 1.0, 0.11490348493190048, -1.6506826068162544, 0.049938776894223539, 4.4167700523334115),
    (2, 2.404825557695773, 0.43175480701968038, -0.42447395889734598, 0.10298365841072814, 1.5399080239691411),
    (2, 3.7, 0.42832965620657587, 0.11915507531954182, 0.11667762652305144, 1.017626978684998),
    (2, 7.9, -0.13887338916488553, -0.25252628416477403, 0.11021885162461312, 0.5573552172766405),
    (2, 8.1, -0.086379733802009056, -0.27096757461643134, 0.10957336792636031, 0.54758538055500632),
    (2, 12.5, -0.17336146343878266, 0.1466001857986691, 0.096524100503784758, 0.40947372382852013),
    (2, 19.0, -0.15775590609569428, 0.09377652150506219, 0.082704019651548762, 0.31654576676313979),
    (2, 24.9, -0.094077751447907769, 0.12959134804531509, 0.07403573462903397, 0.27040623734927109),
    (2, 25.1, -0.11740991724771221, 0.10795318706211416, 0.073786247837693176, 0.26917152541508486),
    (2, 40.0, -0.0010649746823580396, -0.12622609234933841, 0.060154168421513227, 0.20755608332001984),
    (2, 99.0, 0.053279832390638991, 0.05994157636044121, 0.039339197542893792, 0.12835897268607428),
    (2, 317.0, 0.021108653665172121, -0.039531335403642854, 0.022274481412921519, 0.070810072170603246),
    (2, 1000.0, -0.024777229528605996, -0.004765486640207517, 0.012592018595377399, 0.039707617862380138),
    (5, 0.001, 2.6041665581597244e-19, -2.4446200786802638e+17, 2.601563910047908e-19, 3.8438416804000496e+17),
    (5, 0.05, 8.1371731606730968e-11, -782400620.01530026, 7.741931277040323e-11, 1291600100.1995859),
    (5, 0.5, 8.0536272413574741e-6, -7946.3014788074733, 4.9876055214701639e-6, 19946.196094733716),
    (5, 1.0, 0.00024975773021123443, -260.40586662581222, 9.9865714112086907e-5, 981.1926115029156),
    (5, 2.404825557695773, 0.016389243204805852, -4.4919848883206289, 0.002396635684297009, 37.515679104175257),
    (5, 3.7, 0.09948541700833391, -0.97906506823354206, 0.0077317795724907951, 10.370679186819338),
    (5, 7.9, 0.20747350940067681, 0.24328702690964159, 0.028303776991926652, 1.8886279366967885),
    (5, 8.1, 0.16322151022791507, 0.26780007398223686, 0.029078283662745341, 1.805679784732946),
    (5, 12.5, 0.034737699762239728, -0.23290393783115079, 0.040805420931421419, 0.910314127562114),
    (5, 19.0, 0.0035723925109004855, -0.18627624962416629, 0.047061869464523002, 0.54087392923421241),
    (5, 24.9, -0.080246762733942447, -0.14018638276614211, 0.048223200929456485, 0.40831565048179851),
    (5, 25.1, -0.051194170474627658, -0.1524943549100337, 0.048227220813608142, 0.40515235143383261),
    (5, 40.0, 0.12257346597711779, 0.031869448780850364, 0.046129982914956815, 0.2688997595180325),
    (5, 99.0, -0.065281008980326514, 0.046658612246724773, 0.035362294869739464, 0.14264173896511298),
    (5, 317.0, 0.038812611191084706, 0.022407428099030037, 0.02154765607275707, 0.073190924082555983),
    (5, 1000.0, 0.0050254069452331861, -0.024725956719740691, 0.012460428940768863, 0.040126532961450424),
    (10, 0.001, 2.6911443943049993e-40, -1.1828049377990414e+38, 2.6884547172369639e-40, 1.8598044232213e+38),
    (10, 0.05, 2.6279214389787749e-23, -1.2112763365186742e+21, 2.5000402773777602e-23, 1.9999425269916862e+21),
    (10, 0.5, 2.6131773608228031e-13, -121963623349.56963, 1.6030859629529217e-13, 311505389372.0995),
    (10, 1.0, 2.6306151236874532e-10, -121618014.27868919, 1.0127529864692066e-10, 491229652.09901986),
    (10, 2.404825557695773, 1.525365603928156e-6, -21506.373920124463, 1.7911988785281065e-7, 271339.40979967843),
    (10, 3.7, 9.4410282007872268e-5, -363.32706786523231, 4.3500210231385277e-6, 10775.124278545862),
    (10, 7.9, 0.055869872504109696, -0.96553916547422967, 0.00036252558366337885, 108.15817316661664),
    (10, 8.1, 0.065942923604934147, -0.85366907745089259, 0.00040690717419755363, 95.426821013086449),
    (10, 12.5, 0.2788717465935357, 0.064061536382274494, 0.0021945600764555522, 14.228770072839282),
    (10, 19.0, 0.091553331622639788, -0.17592797247467411, 0.0065786816773517822, 3.5397493369951657),
    (10, 24.9, -0.088688801558025676, -0.14154908531382958, 0.010647658221373188, 1.7501140574412293),
    (10, 25.1, -0.061095034514211718, -0.15461319280028611, 0.010775651399058227, 1.7174423531074528),
    (10, 40.0, 0.11938336278226095, -0.046723877232677865, 0.01796403516386834, 0.67509184475256114),
    (10, 99.0, 0.019217738228763877, 0.078065045671164262, 0.024175450397587922, 0.20785527680632167),
    (10, 317.0, 0.026836948697256824, -0.035903202172251424, 0.019140292365395587, 0.0823657634386046),
    (10, 1000.0, -0.024520622306036558, -0.0059490005741626686, 0.012001595024124219, 0.041659051428005658),
];

fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= rel * b.abs() + abs
}

#[test]
fn matches_high_precision_reference() {
    let mut worst = 0.0f64;
    for &(n, x, j, y, i, k) in REFERENCE {
        let cj = bessel_j(n, x).unwrap().value;
        let cy = bessel_y(n, x).unwrap().value;
        let ci = bessel_i_scaled(n, x).unwrap().value;
        let ck = bessel_k_scaled(n, x).unwrap().value;
        // J and Y oscillate; near a zero only absolute accuracy relative
        // to the envelope is meaningful.
        let env = (2.0 / (std::f64::consts::PI * x)).sqrt().min(1.0);
        for (name, got, want, abs) in [
            ("J", cj, j, 1e-13 * env),
            ("Y", cy, y, 1e-13 * env),
            ("I", ci, i, 0.0),
            ("K", ck, k, 0.0),
        ] {
            let err = (got - want).abs() / (want.abs() + abs / 1e-10);
            worst = worst.max(err);
            assert!(close(got, want, 1e-10, abs), "{name}_{n}({x}) = {got}, want {want}");
        }
    }
    eprintln!("worst scaled error {worst:e}");
}
