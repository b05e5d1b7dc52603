package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void oneIsEven() {
        Calc calc = new Calc();
        assertTrue("one should be even", calc.isEven(1));
    }
}
