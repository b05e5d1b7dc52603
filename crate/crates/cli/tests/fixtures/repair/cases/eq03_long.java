package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void squareLong() {
        Calc calc = new Calc();
        assertEquals(10L, calc.square(3L));
    }
}
