package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void halves() {
        Calc calc = new Calc();
        assertEquals(2.0, calc.half(5.0), 0.001);
    }
}
