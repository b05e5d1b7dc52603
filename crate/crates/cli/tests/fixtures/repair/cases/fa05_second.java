package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void parity() {
        Calc calc = new Calc();
        assertFalse(calc.isEven(5));
        assertFalse(calc.isEven(6));
    }
}
