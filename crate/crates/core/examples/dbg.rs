use localred_core::assembler::*;
use localred_core::bits::Bits;
use localred_core::fixtures::eq_machine;
fn main() {
    let asm = assemble(&eq_machine(), &Bits::from_str01("101"), 6, 1).unwrap();
    let p = &asm.params;
    let input = Bits::from_str01("100100100000111100000101010000000");
    let label = input.slice(0..p.ell);
    println!("region {:?} type {:?}", p.region_of(&label), asm.gate_type(&label));
    let sh = p.fetch.as_ref().unwrap();
    println!("fetch width {} tag {}", sh.label_width(), label.read_u64(2..4));
    let c = asm.emit_clause(&label, 0, false);
    println!("native lit0 sign {}", c.lits[0].positive);
    let map = asm.clause_map();
    let got = map.eval(&input);
    println!("map lit0 sign {}", got.get(p.v));
}
